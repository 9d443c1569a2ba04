"""Trajectory export for offline policy learning.

Each model turn in a transcript becomes one step record: a state digest
(gallery, accumulated constraints, feasible size, budget remaining), the
action taken, the observation (the oracle's verdict), and a dense reward
split into components.  Skip turns carry a penalty, informative turns earn
progress proportional to the fraction of the gallery they eliminated, and
only a verified-correct identification earns the terminal reward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from .harness import Transcript
from .metrics import Outcome, score_episode


@dataclass(frozen=True, slots=True)
class RewardConfig:
    alpha: float = 1.0
    skip_penalty: float = -0.2
    terminal: float = 1.0

    def __post_init__(self) -> None:
        if self.skip_penalty >= 0:
            raise ValueError("skip_penalty must be negative")
        if self.terminal <= 0:
            raise ValueError("terminal reward must be positive")


@dataclass(frozen=True, slots=True)
class RLStep:
    episode_id: str
    turn_index: int
    state: dict
    action: dict
    observation: str | None
    skip_penalty: float
    progress: float
    terminal: float

    @property
    def reward(self) -> float:
        return self.skip_penalty + self.progress + self.terminal


def export_rl(
    transcripts: Iterable[Transcript], config: RewardConfig = RewardConfig()
) -> Iterator[RLStep]:
    """One RLStep per model turn, guess turn included."""
    for transcript in transcripts:
        outcome = score_episode(transcript).outcome
        gallery_size = len(transcript.gallery)
        feasible = gallery_size
        constraints: list[dict] = []
        for turn in transcript.turns:
            eliminated = feasible - turn.feasible_size_after
            if turn.verdict in ("yes", "no") and turn.resolved_value is not None:
                constraints = _update_constraints(constraints, turn)
            yield RLStep(
                episode_id=transcript.episode_id,
                turn_index=turn.turn_index,
                state={
                    "gallery": list(transcript.gallery),
                    "constraints": list(constraints),
                    "feasible_size": feasible,
                    "budget_remaining": transcript.budget - turn.turn_index + 1,
                },
                action={"kind": turn.action_kind, "value": turn.resolved_value,
                        "text": turn.raw_text},
                observation=turn.verdict,
                skip_penalty=config.skip_penalty if turn.verdict == "skip" else 0.0,
                progress=config.alpha * (eliminated / gallery_size),
                terminal=0.0,
            )
            feasible = turn.feasible_size_after
        if transcript.guess is not None:
            yield RLStep(
                episode_id=transcript.episode_id,
                turn_index=transcript.guess.turn_index,
                state={
                    "gallery": list(transcript.gallery),
                    "constraints": list(constraints),
                    "feasible_size": feasible,
                    "budget_remaining": transcript.budget - transcript.guess.turn_index + 1,
                },
                action={"kind": "guess", "value": None, "index": transcript.guess.index,
                        "text": transcript.guess.raw_text},
                observation=None,
                skip_penalty=0.0,
                progress=0.0,
                terminal=config.terminal if outcome is Outcome.VERIFIED_CORRECT else 0.0,
            )


def _update_constraints(constraints: list[dict], turn) -> list[dict]:
    polarity = "must_have" if turn.verdict == "yes" else "must_lack"
    updated = [c for c in constraints if c["value_id"] != turn.resolved_value]
    updated.append(
        {
            "value_id": turn.resolved_value,
            "polarity": polarity,
            "source_turn": turn.turn_index,
        }
    )
    return updated


def step_to_dict(step: RLStep) -> dict:
    return {
        "episode_id": step.episode_id,
        "turn_index": step.turn_index,
        "state": step.state,
        "action": step.action,
        "observation": step.observation,
        "reward": {
            "skip_penalty": step.skip_penalty,
            "progress": step.progress,
            "terminal": step.terminal,
        },
    }


def dump_rl(transcripts: Iterable[Transcript], config: RewardConfig = RewardConfig()) -> bytes:
    lines = [
        json.dumps(step_to_dict(step), separators=(",", ":"))
        for step in export_rl(transcripts, config)
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
