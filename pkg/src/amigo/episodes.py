"""Attribute-overlap similarity, distractor retrieval, and episode generation.

A gallery is built around a hidden target: for each of the target's Present
attribute values we retrieve up to k other items that share the value and
score at least tau against the target, merge those retrieved sets into a
distractor pool, and sample the gallery from the pool.  Difficulty is
controlled by tau (higher means more confusable distractors) and gallery
size.  Every operation here is a pure function of (catalog, target, config),
seed included.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from typing import AbstractSet, Iterable, Sequence

from .catalog import Catalog, UnknownItem, UnknownValue, attrs_of
from .rng import SplitMix64

MAX_SEED = (1 << 64) - 1


class EmptyReference(Exception):
    """Similarity is undefined when the reference attribute set is empty."""


class TargetLacksValue(Exception):
    """Retrieval was asked for a value the target does not have."""


class GallerySizeExceedsPool(Exception):
    """The configured gallery needs more distractors than the pool holds."""


def similarity(attrs_a: AbstractSet[str], attrs_b: AbstractSet[str]) -> float:
    """Asymmetric overlap score |A intersect B| / |A|, in [0, 1].

    Measures how well B covers A's attributes; it is 1 exactly when A's
    attribute set is a subset of B's.
    """
    if not attrs_a:
        raise EmptyReference("reference attribute set is empty; similarity undefined")
    return len(attrs_a & attrs_b) / len(attrs_a)


@dataclass(frozen=True, slots=True)
class EpisodeConfig:
    tau: float
    gallery_size: int
    seed: int = 0
    per_value_retrieval_k: int = 5
    min_pool_size: int = 6

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.gallery_size < 2:
            raise ValueError(f"gallery_size must be at least 2, got {self.gallery_size}")
        if self.per_value_retrieval_k < 1:
            raise ValueError("per_value_retrieval_k must be positive")
        if self.min_pool_size < 1:
            raise ValueError("min_pool_size must be positive")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True, slots=True)
class Episode:
    episode_id: str
    gallery: tuple[str, ...]
    target_position: int  # 1-indexed
    config: EpisodeConfig
    pool_size: int

    def __post_init__(self) -> None:
        if not 1 <= self.target_position <= len(self.gallery):
            raise ValueError("target_position outside the gallery")
        if len(set(self.gallery)) != len(self.gallery):
            raise ValueError("gallery items must be distinct")

    @property
    def target_id(self) -> str:
        return self.gallery[self.target_position - 1]


def retrieve_by_value(
    catalog: Catalog, target_id: str, value_id: str, tau: float, k: int
) -> list[str]:
    """Up to k items sharing ``value_id`` with similarity(target, item) >= tau.

    Ordered by similarity descending, then item id ascending, so retrieval is
    a total deterministic order.
    """
    if value_id not in catalog.values:
        raise UnknownValue(f"unknown attribute value {value_id!r}")
    target_attrs = attrs_of(catalog, target_id)
    if value_id not in target_attrs:
        raise TargetLacksValue(f"target {target_id!r} does not have value {value_id!r}")
    scored: list[tuple[float, str]] = []
    for item_id in catalog.items:
        if item_id == target_id:
            continue
        candidate_attrs = catalog._present_sets[item_id]
        if value_id not in candidate_attrs:
            continue
        score = similarity(target_attrs, candidate_attrs)
        if score >= tau:
            scored.append((score, item_id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [item_id for _, item_id in scored[:k]]


def build_distractor_pool(
    catalog: Catalog, target_id: str, tau: float, k: int
) -> set[str]:
    """Union of per-value retrievals over every Present value of the target."""
    if target_id not in catalog.items:
        raise UnknownItem(f"unknown item {target_id!r}")
    pool: set[str] = set()
    for value_id in sorted(attrs_of(catalog, target_id)):
        pool.update(retrieve_by_value(catalog, target_id, value_id, tau, k))
    pool.discard(target_id)
    return pool


def generate_episode(
    catalog: Catalog, target_id: str, config: EpisodeConfig
) -> Episode | None:
    """Build a gallery around the target, or None when the pool is too small.

    Targets whose merged pool holds fewer than ``min_pool_size`` distractors
    are infeasible.  Distractors are sampled uniformly without replacement
    and the target is inserted at a uniform position, both driven by the
    config seed.
    """
    pool = build_distractor_pool(
        catalog, target_id, config.tau, config.per_value_retrieval_k
    )
    pool_size = len(pool)
    if pool_size < config.min_pool_size:
        return None
    wanted = config.gallery_size - 1
    if wanted > pool_size:
        raise GallerySizeExceedsPool(
            f"gallery of {config.gallery_size} needs {wanted} distractors "
            f"but the pool holds {pool_size}"
        )
    rng = SplitMix64(config.seed)
    distractors = rng.sample(sorted(pool), wanted)
    position = rng.below(config.gallery_size) + 1
    gallery = distractors[: position - 1] + [target_id] + distractors[position - 1 :]
    episode_id = f"{target_id}-t{config.tau:g}-g{config.gallery_size}-s{config.seed}"
    return Episode(
        episode_id=episode_id,
        gallery=tuple(gallery),
        target_position=position,
        config=config,
        pool_size=pool_size,
    )


def gallery_size_stats(episodes: Iterable[Episode]) -> dict[tuple[float, int], int]:
    """Histogram of gallery sizes keyed by (tau, gallery size)."""
    counts: Counter[tuple[float, int]] = Counter()
    for episode in episodes:
        counts[(episode.config.tau, len(episode.gallery))] += 1
    return dict(counts)


def stats_rows(counts: dict[tuple[float, int], int]) -> list[dict]:
    return [
        {"tau": tau, "gallery_size": size, "count": count}
        for (tau, size), count in sorted(counts.items())
    ]


def episode_to_dict(episode: Episode) -> dict:
    return {
        "episode_id": episode.episode_id,
        "tau": episode.config.tau,
        "gallery": list(episode.gallery),
        "target_position": episode.target_position,
        "seed": episode.config.seed,
        "pool_size": episode.pool_size,
    }


def episode_from_dict(doc: dict) -> Episode:
    gallery = tuple(doc["gallery"])
    config = EpisodeConfig(
        tau=float(doc["tau"]),
        gallery_size=len(gallery),
        seed=int(doc["seed"]),
    )
    return Episode(
        episode_id=str(doc["episode_id"]),
        gallery=gallery,
        target_position=int(doc["target_position"]),
        config=config,
        pool_size=int(doc["pool_size"]),
    )


def dump_episodes(episodes: Sequence[Episode]) -> bytes:
    doc = [episode_to_dict(ep) for ep in episodes]
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def load_episodes(raw: bytes | str) -> list[Episode]:
    doc = json.loads(raw)
    if not isinstance(doc, list):
        raise ValueError("episode file must be a list of episode records")
    return [episode_from_dict(entry) for entry in doc]


def with_seed(config: EpisodeConfig, seed: int) -> EpisodeConfig:
    return replace(config, seed=seed)
