"""Episode scoring and aggregate reporting.

Scoring is stateless: everything comes out of the persisted transcript, so
any transcript can be re-scored offline.  An episode lands in exactly one of
four outcomes:

* verified_correct: the guess matches the target AND the feasible set was
  exactly the target immediately before the guess,
* random_guess_correct: the guess matches the target without that evidence,
* incorrect: a guess that misses,
* no_guess: the budget ran out (or the agent aborted) with no parsed guess.

Aggregation groups by tau and reports accuracies with percentile-bootstrap
95% intervals, efficiency per outcome, skip rates, premature-output rates,
and noise-conditioned accuracies over episodes where noise actually landed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .harness import Transcript


class EmptyGroup(Exception):
    """Aggregation was asked to summarize an empty collection."""


class InconsistentTranscript(Exception):
    """Transcript violates its structural invariants (e.g. turn order)."""


class Outcome(Enum):
    VERIFIED_CORRECT = "verified_correct"
    RANDOM_GUESS_CORRECT = "random_guess_correct"
    INCORRECT = "incorrect"
    NO_GUESS = "no_guess"


@dataclass(frozen=True, slots=True)
class EpisodeScore:
    episode_id: str
    tau: float
    outcome: Outcome
    turns_total: int
    skip_count: int
    skip_rate: float
    premature_output_count: int
    noise_mode: str
    noise_applied: bool
    contradiction_raised: bool

    @property
    def correct(self) -> bool:
        return self.outcome in (Outcome.VERIFIED_CORRECT, Outcome.RANDOM_GUESS_CORRECT)


def score_episode(transcript: "Transcript") -> EpisodeScore:
    """Score one finished episode from its transcript alone."""
    indices = [turn.turn_index for turn in transcript.turns]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise InconsistentTranscript(
            f"turn indices must increase strictly: {indices}"
        )

    skip_count = sum(
        1 for turn in transcript.turns if turn.verdict == "skip"
    )
    turns_total = len(transcript.turns)
    skip_rate = skip_count / turns_total if turns_total else 0.0

    guess = transcript.guess
    if guess is None:
        outcome = Outcome.NO_GUESS
    else:
        correct = guess.index == transcript.target_position
        if not correct:
            outcome = Outcome.INCORRECT
        else:
            target_id = transcript.gallery[transcript.target_position - 1]
            verified = (
                transcript.feasible_size_before_guess == 1
                and transcript.unique_candidate_before_guess == target_id
            )
            outcome = Outcome.VERIFIED_CORRECT if verified else Outcome.RANDOM_GUESS_CORRECT

    return EpisodeScore(
        episode_id=transcript.episode_id,
        tau=transcript.tau,
        outcome=outcome,
        turns_total=turns_total,
        skip_count=skip_count,
        skip_rate=skip_rate,
        premature_output_count=len(transcript.premature_outputs),
        noise_mode=transcript.noise_mode,
        noise_applied=bool(transcript.applied_log),
        contradiction_raised=any(turn.contradiction for turn in transcript.turns),
    )


def bootstrap_interval(
    successes: Sequence[float],
    level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean, deterministic given seed."""
    if len(successes) == 0:
        raise ValueError("bootstrap_interval needs a non-empty sample")
    if resamples < 1:
        raise ValueError("resamples must be at least 1")
    data = np.asarray(successes, dtype=np.float64)
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, data.size, size=(resamples, data.size))
    means = data[draws].mean(axis=1)
    lo = float(np.percentile(means, 100 * (1 - level) / 2))
    hi = float(np.percentile(means, 100 * (1 + level) / 2))
    return lo, hi


@dataclass(frozen=True, slots=True)
class MetricWithCI:
    value: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True, slots=True)
class GroupReport:
    group: str
    episode_count: int
    verified_count: int
    random_guess_count: int
    correct_count: int
    no_guess_count: int
    verified_accuracy: MetricWithCI
    overall_accuracy: MetricWithCI
    random_guess_accuracy: MetricWithCI
    mean_turns: Mapping[str, float | None]
    mean_skip_rate: float
    premature_output_rate: float
    mean_premature_outputs: float
    noise_applied_count: int
    verified_accuracy_under_noise: float | None
    overall_accuracy_under_noise: float | None


@dataclass(frozen=True, slots=True)
class AggregateReport:
    groups: Mapping[str, GroupReport]
    overall: GroupReport


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _metric(flags: Sequence[int], resamples: int, seed: int) -> MetricWithCI:
    lo, hi = bootstrap_interval(flags, resamples=resamples, seed=seed)
    return MetricWithCI(value=sum(flags) / len(flags), ci_low=lo, ci_high=hi)


def _group_report(
    group: str, scores: Sequence[EpisodeScore], resamples: int, seed: int
) -> GroupReport:
    if not scores:
        raise EmptyGroup(f"group {group!r} has no episodes")
    from .rng import derive_seed

    verified = [1 if s.outcome is Outcome.VERIFIED_CORRECT else 0 for s in scores]
    random_guess = [1 if s.outcome is Outcome.RANDOM_GUESS_CORRECT else 0 for s in scores]
    correct = [1 if s.correct else 0 for s in scores]

    verified_count = sum(verified)
    random_guess_count = sum(random_guess)
    correct_count = sum(correct)
    if verified_count + random_guess_count != correct_count:
        raise InconsistentTranscript(
            "outcome accounting identity violated: "
            f"{verified_count} + {random_guess_count} != {correct_count}"
        )

    turns_by_outcome: dict[str, list[int]] = defaultdict(list)
    for s in scores:
        turns_by_outcome["all"].append(s.turns_total)
        if s.outcome is Outcome.VERIFIED_CORRECT:
            turns_by_outcome["verified_correct"].append(s.turns_total)
        elif s.outcome is Outcome.RANDOM_GUESS_CORRECT:
            turns_by_outcome["random_guess_correct"].append(s.turns_total)
        else:
            # no_guess folds into incorrect for efficiency reporting
            turns_by_outcome["incorrect"].append(s.turns_total)

    noisy = [s for s in scores if s.noise_mode != "none" and s.noise_applied]

    return GroupReport(
        group=group,
        episode_count=len(scores),
        verified_count=verified_count,
        random_guess_count=random_guess_count,
        correct_count=correct_count,
        no_guess_count=sum(1 for s in scores if s.outcome is Outcome.NO_GUESS),
        verified_accuracy=_metric(verified, resamples, derive_seed(seed, group, "verified")),
        overall_accuracy=_metric(correct, resamples, derive_seed(seed, group, "overall")),
        random_guess_accuracy=_metric(random_guess, resamples, derive_seed(seed, group, "random")),
        mean_turns={
            key: _mean(turns_by_outcome.get(key, []))
            for key in ("verified_correct", "random_guess_correct", "incorrect", "all")
        },
        mean_skip_rate=sum(s.skip_rate for s in scores) / len(scores),
        premature_output_rate=sum(1 for s in scores if s.premature_output_count > 0)
        / len(scores),
        mean_premature_outputs=sum(s.premature_output_count for s in scores) / len(scores),
        noise_applied_count=len(noisy),
        verified_accuracy_under_noise=_mean(
            [1 if s.outcome is Outcome.VERIFIED_CORRECT else 0 for s in noisy]
        ),
        overall_accuracy_under_noise=_mean([1 if s.correct else 0 for s in noisy]),
    )


def aggregate(
    scores: Sequence[EpisodeScore],
    resamples: int = 1000,
    seed: int = 0,
) -> AggregateReport:
    """Per-tau group reports plus an overall report."""
    if not scores:
        raise EmptyGroup("no episodes to aggregate")
    by_tau: dict[str, list[EpisodeScore]] = defaultdict(list)
    for score in scores:
        by_tau[f"{score.tau:g}"].append(score)
    groups = {
        key: _group_report(key, group_scores, resamples, seed)
        for key, group_scores in sorted(by_tau.items())
    }
    overall = _group_report("overall", list(scores), resamples, seed)
    return AggregateReport(groups=groups, overall=overall)


def _metric_dict(metric: MetricWithCI) -> dict:
    return {"value": metric.value, "ci_low": metric.ci_low, "ci_high": metric.ci_high}


def group_to_dict(report: GroupReport) -> dict:
    return {
        "group": report.group,
        "episode_count": report.episode_count,
        "verified_count": report.verified_count,
        "random_guess_count": report.random_guess_count,
        "correct_count": report.correct_count,
        "no_guess_count": report.no_guess_count,
        "verified_accuracy": _metric_dict(report.verified_accuracy),
        "overall_accuracy": _metric_dict(report.overall_accuracy),
        "random_guess_accuracy": _metric_dict(report.random_guess_accuracy),
        "mean_turns": dict(report.mean_turns),
        "mean_skip_rate": report.mean_skip_rate,
        "premature_output_rate": report.premature_output_rate,
        "mean_premature_outputs": report.mean_premature_outputs,
        "noise_applied_count": report.noise_applied_count,
        "verified_accuracy_under_noise": report.verified_accuracy_under_noise,
        "overall_accuracy_under_noise": report.overall_accuracy_under_noise,
    }


def report_to_dict(report: AggregateReport) -> dict:
    return {
        "groups": {key: group_to_dict(g) for key, g in report.groups.items()},
        "overall": group_to_dict(report.overall),
    }


def flat_rows(report: AggregateReport) -> list[tuple[str, str, float, float | None, float | None]]:
    """One (group, metric, value, ci_low, ci_high) row per group-metric, for plotting."""
    rows: list[tuple[str, str, float, float | None, float | None]] = []
    for key, group in list(report.groups.items()) + [("overall", report.overall)]:
        for name, metric in (
            ("verified_accuracy", group.verified_accuracy),
            ("overall_accuracy", group.overall_accuracy),
            ("random_guess_accuracy", group.random_guess_accuracy),
        ):
            rows.append((key, name, metric.value, metric.ci_low, metric.ci_high))
        rows.append((key, "mean_skip_rate", group.mean_skip_rate, None, None))
        rows.append((key, "premature_output_rate", group.premature_output_rate, None, None))
        for outcome_key, mean_turns in group.mean_turns.items():
            if mean_turns is not None:
                rows.append((key, f"mean_turns_{outcome_key}", mean_turns, None, None))
    return rows
