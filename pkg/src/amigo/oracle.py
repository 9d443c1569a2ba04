"""Label-backed answering for the hidden target, with controlled noise.

The oracle answers valid questions straight from the target's ternary labels
(Present -> Yes, Absent -> No, Unknown -> Unsure).  A noise plan may rewrite
at most one answer per episode: flip_one swaps a single Yes/No, and
perturb_unsure rewrites a single Unsure into a seeded Yes or No.  Every
rewrite is logged for post-hoc auditing; the rewritten verdict is the only
one other components ever see.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .catalog import Catalog, Label, UnknownValue
from .protocol import Verdict, VerdictKind
from .rng import SplitMix64, derive_seed


class NoiseMode(Enum):
    NONE = "none"
    FLIP_ONE = "flip_one"
    PERTURB_UNSURE = "perturb_unsure"


@dataclass(frozen=True, slots=True)
class NoisePlan:
    """Where and how a single answer gets rewritten.

    ``affected_turn`` pins the rewrite to a specific post-upload turn index.
    When None, an eligible slot is drawn uniformly from [1, budget] up front,
    which makes the applied rewrite uniform over the eligible answers that
    actually occur; if the episode produces fewer eligible answers than the
    drawn slot, the episode is tagged noise-not-applied.
    """

    mode: NoiseMode = NoiseMode.NONE
    affected_turn: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.affected_turn is not None and self.affected_turn < 1:
            raise ValueError("affected_turn is a positive turn index")


@dataclass(frozen=True, slots=True)
class AppliedNoise:
    turn_index: int
    original: VerdictKind
    emitted: VerdictKind


@dataclass(slots=True)
class OracleState:
    """Per-episode oracle: target labels plus noise bookkeeping."""

    target_labels: Mapping[str, Label]
    catalog: Catalog
    plan: NoisePlan
    budget: int
    valid_turn_counter: int = 0
    applied_log: list[AppliedNoise] = field(default_factory=list)
    _eligible_seen: int = 0
    _slot: int | None = None
    _rng: SplitMix64 = field(default_factory=lambda: SplitMix64(0))

    def __post_init__(self) -> None:
        self._rng = SplitMix64(derive_seed(self.plan.seed, "oracle-noise"))
        if self.plan.mode is not NoiseMode.NONE and self.plan.affected_turn is None:
            self._slot = self._rng.below(self.budget) + 1

    @property
    def noise_applied(self) -> bool:
        return bool(self.applied_log)


def make_oracle(
    catalog: Catalog, target_id: str, plan: NoisePlan, budget: int
) -> OracleState:
    return OracleState(
        target_labels=catalog.item(target_id).labels,
        catalog=catalog,
        plan=plan,
        budget=budget,
    )


def base_verdict(labels: Mapping[str, Label], value_id: str) -> VerdictKind:
    label = labels.get(value_id, Label.UNKNOWN)
    if label is Label.PRESENT:
        return VerdictKind.YES
    if label is Label.ABSENT:
        return VerdictKind.NO
    return VerdictKind.UNSURE


def answer(state: OracleState, value_id: str, turn_index: int) -> Verdict:
    """Answer a question that was already classified valid.

    ``turn_index`` is the post-upload model turn; it drives noise placement
    and is what the applied log records.
    """
    if value_id not in state.catalog.values:
        raise UnknownValue(f"unknown attribute value {value_id!r}")
    state.valid_turn_counter += 1
    kind = base_verdict(state.target_labels, value_id)
    emitted = _maybe_rewrite(state, kind, turn_index)
    return Verdict(kind=emitted)


def _maybe_rewrite(
    state: OracleState, kind: VerdictKind, turn_index: int
) -> VerdictKind:
    plan = state.plan
    if plan.mode is NoiseMode.NONE or state.applied_log:
        return kind
    eligible = _is_eligible(plan.mode, kind)
    if not eligible:
        return kind
    if plan.affected_turn is not None:
        if turn_index != plan.affected_turn:
            return kind
    else:
        state._eligible_seen += 1
        if state._eligible_seen != state._slot:
            return kind
    emitted = _rewrite(state, kind)
    state.applied_log.append(
        AppliedNoise(turn_index=turn_index, original=kind, emitted=emitted)
    )
    return emitted


def _is_eligible(mode: NoiseMode, kind: VerdictKind) -> bool:
    if mode is NoiseMode.FLIP_ONE:
        return kind in (VerdictKind.YES, VerdictKind.NO)
    if mode is NoiseMode.PERTURB_UNSURE:
        return kind is VerdictKind.UNSURE
    return False


def _rewrite(state: OracleState, kind: VerdictKind) -> VerdictKind:
    if state.plan.mode is NoiseMode.FLIP_ONE:
        return VerdictKind.NO if kind is VerdictKind.YES else VerdictKind.YES
    # perturb_unsure: seeded coin between Yes and No
    return VerdictKind.YES if state._rng.chance(1, 2) else VerdictKind.NO
