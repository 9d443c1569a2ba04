"""Baseline question-selection policies.

Three baselines exercise the protocol end to end:

* random: uniformly asks any value the detector would accept, guessing once
  its private feasible mirror reaches a single candidate (lower bound),
* greedy: asks the value that most evenly splits the mirror into present
  and absent halves (balanced-split heuristic),
* verifier: greedy plus recovery; when its mirror runs empty it re-asks the
  oldest piece of evidence under the contradiction license and drops the
  refuted constraint.

Agents never see the target or the noise plan.  Each keeps a private mirror
of the feasible set rebuilt from the observable dialogue history, rather
than reading the engine's verification state, so the evaluated side of the
boundary stays honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .catalog import Catalog, Label
from .protocol import (
    Phase,
    TurnRecord,
    VerdictKind,
    classify_question,
    question_for_value,
)
from .rng import SplitMix64, derive_seed
from .verification import Constraint, Polarity, satisfies


class NoValidQuestionRemains(Exception):
    """Every remaining value would be rejected by the detector."""


@dataclass(frozen=True, slots=True)
class AskValue:
    value_id: str


@dataclass(frozen=True, slots=True)
class AskText:
    text: str


@dataclass(frozen=True, slots=True)
class Guess:
    index: int  # 1-based gallery position
    forced: bool = False


@dataclass(frozen=True, slots=True)
class SignalEndAck:
    pass


AgentAction = Union[AskValue, AskText, Guess, SignalEndAck]


@dataclass(frozen=True, slots=True)
class ItemDescriptor:
    """What an agent is shown about one uploaded item: id, position, and an
    opaque media reference.  Labels are never part of the descriptor."""

    item_id: str
    position: int
    media: str | None = None


@dataclass(frozen=True)
class AgentObservation:
    gallery: tuple[str, ...]
    labels: Mapping[str, Mapping[str, Label]]
    catalog: Catalog
    history: tuple[TurnRecord, ...]
    phase: Phase
    budget_remaining: int


class EpisodeAgent:
    """Per-episode agent interface driven by the harness.

    ``upload_batch`` is called once per upload batch; anything other than
    SignalEndAck counts as a premature output.  ``act`` is called once per
    post-upload turn.  ``notify_verdict`` and ``episode_end`` exist for
    agents that push state over a wire; in-process agents read everything
    from the observation history.
    """

    name = "agent"

    def upload_batch(
        self, items: Sequence[ItemDescriptor], batch_index: int, is_last: bool
    ) -> AgentAction:
        return SignalEndAck()

    def act(self, obs: AgentObservation) -> AgentAction:
        raise NotImplementedError

    def notify_verdict(self, turn_index: int, verdict_kind: str, violation: str | None) -> None:
        pass

    def episode_end(self, outcome: str) -> None:
        pass


# --------------------------------------------------------------------------
# Mirror reconstruction from observable history
# --------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Mirror:
    members: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    refuted_this_turn: bool


def rebuild_mirror(obs: AgentObservation) -> Mirror:
    """Feasible candidates implied by the valid Yes/No turns seen so far.

    Replays the same filtering semantics the engine uses: the newest answer
    on a value supersedes an older opposite answer.
    """
    constraints: dict[str, Constraint] = {}
    refuted_last = False
    for turn in obs.history:
        if turn.verdict.kind not in (VerdictKind.YES, VerdictKind.NO):
            refuted_last = False
            continue
        value_id = turn.question.resolved_value
        if value_id is None:
            continue
        polarity = (
            Polarity.MUST_HAVE
            if turn.verdict.kind is VerdictKind.YES
            else Polarity.MUST_LACK
        )
        previous = constraints.get(value_id)
        refuted_last = previous is not None and previous.polarity is not polarity
        constraints[value_id] = Constraint(value_id, polarity, turn.question.turn_index)
    ordered = tuple(sorted(constraints.values(), key=lambda c: c.source_turn))
    members = tuple(
        item_id
        for item_id in obs.gallery
        if all(satisfies(obs.labels[item_id], c) for c in ordered)
    )
    return Mirror(members=members, constraints=ordered, refuted_this_turn=refuted_last)


def _contradiction_mode(obs: AgentObservation, mirror: Mirror) -> bool:
    # Mirrors the engine flag: the set is empty, or the last turn just
    # replaced a refuted constraint.
    return not mirror.members or mirror.refuted_this_turn


def valid_values(obs: AgentObservation, contradiction_mode: bool) -> list[str]:
    """Catalog values the detector would accept right now, id-sorted."""
    turn_index = len(obs.history) + 1
    accepted = []
    for value_id in sorted(obs.catalog.values):
        question = question_for_value(obs.catalog, value_id, turn_index)
        kind = classify_question(
            obs.catalog, question, obs.history, Phase.PLAY, contradiction_mode
        )
        if kind is None:
            accepted.append(value_id)
    return accepted


def _position_of(obs: AgentObservation, item_id: str) -> int:
    return obs.gallery.index(item_id) + 1


def _forced_guess(obs: AgentObservation, mirror: Mirror, rng: SplitMix64) -> Guess:
    # Uniform over the mirror; an empty mirror falls back to the gallery.
    candidates = mirror.members or obs.gallery
    return Guess(index=_position_of(obs, rng.choice(sorted(candidates))), forced=True)


@dataclass
class RandomValidAgent(EpisodeAgent):
    """Uniformly asks any currently-valid value; guesses at mirror size 1."""

    seed: int = 0
    name: str = "random"

    def act(self, obs: AgentObservation) -> AgentAction:
        turn_index = len(obs.history) + 1
        rng = SplitMix64(derive_seed(self.seed, "random-agent", turn_index))
        mirror = rebuild_mirror(obs)
        if len(mirror.members) == 1:
            return Guess(index=_position_of(obs, mirror.members[0]))
        candidates = valid_values(obs, _contradiction_mode(obs, mirror))
        if not candidates or obs.budget_remaining <= 1:
            return _forced_guess(obs, mirror, rng)
        return AskValue(rng.choice(candidates))


def _split_counts(
    obs: AgentObservation, mirror: Mirror, value_id: str
) -> tuple[int, int, int]:
    present = absent = unknown = 0
    for item_id in mirror.members:
        label = obs.labels[item_id].get(value_id, Label.UNKNOWN)
        if label is Label.PRESENT:
            present += 1
        elif label is Label.ABSENT:
            absent += 1
        else:
            unknown += 1
    return present, absent, unknown


def pick_greedy_value(obs: AgentObservation, mirror: Mirror, contradiction_mode: bool) -> str | None:
    """Valid value with the most balanced present/absent split over the mirror.

    A value has split power only when the mirror holds both Present and
    Absent members for it: with a truthful oracle the target sits in the
    mirror, so a one-sided value can never eliminate anyone.  Ties break
    toward fewer Unknown members, then ascending id.
    """
    best: tuple[int, int, str] | None = None
    for value_id in valid_values(obs, contradiction_mode):
        present, absent, unknown = _split_counts(obs, mirror, value_id)
        if present == 0 or absent == 0:
            continue
        key = (abs(present - absent), unknown, value_id)
        if best is None or key < best:
            best = key
    return best[2] if best else None


@dataclass
class GreedySplitAgent(EpisodeAgent):
    """Balanced-split heuristic: ask the value that halves the mirror best."""

    seed: int = 0
    name: str = "greedy"

    def act(self, obs: AgentObservation) -> AgentAction:
        mirror = rebuild_mirror(obs)
        if len(mirror.members) == 1:
            return Guess(index=_position_of(obs, mirror.members[0]))
        rng = SplitMix64(derive_seed(self.seed, "greedy-agent", len(obs.history) + 1))
        if obs.budget_remaining <= 1:
            return _forced_guess(obs, mirror, rng)
        value_id = pick_greedy_value(obs, mirror, _contradiction_mode(obs, mirror))
        if value_id is None:
            return _forced_guess(obs, mirror, rng)
        return AskValue(value_id)


def _reasked_values(history: Sequence[TurnRecord]) -> set[str]:
    counts: dict[str, int] = {}
    for turn in history:
        if not turn.is_valid:
            continue
        value_id = turn.question.resolved_value
        if value_id is not None:
            counts[value_id] = counts.get(value_id, 0) + 1
    return {value_id for value_id, n in counts.items() if n >= 2}


@dataclass
class VerifierAgent(EpisodeAgent):
    """Greedy policy plus verification probes and contradiction recovery.

    Narrows exactly like the greedy agent, but does not guess the moment the
    mirror reaches one candidate: it first spends up to ``verify_probes``
    turns asking fresh attributes the candidate is definitely labeled for.
    An answer the candidate cannot satisfy empties the mirror, which is the
    contradiction signal; the agent then re-asks constraint values
    oldest-evidence-first under the contradiction license, drops the refuted
    constraint when a re-ask disagrees with the original answer, and resumes
    narrowing over the rebuilt mirror.
    """

    seed: int = 0
    verify_probes: int = 2
    name: str = "verifier"

    _probes_spent: dict[str, int] = field(default_factory=dict, init=False)

    def act(self, obs: AgentObservation) -> AgentAction:
        mirror = rebuild_mirror(obs)
        rng = SplitMix64(derive_seed(self.seed, "verifier-agent", len(obs.history) + 1))
        if obs.budget_remaining <= 1:
            if len(mirror.members) == 1:
                return Guess(index=_position_of(obs, mirror.members[0]))
            return _forced_guess(obs, mirror, rng)
        if not mirror.members:
            already = _reasked_values(obs.history)
            for constraint in mirror.constraints:
                if constraint.value_id not in already:
                    return AskValue(constraint.value_id)
            return _forced_guess(obs, mirror, rng)
        if len(mirror.members) == 1:
            candidate = mirror.members[0]
            spent = self._probes_spent.get(candidate, 0)
            if spent < self.verify_probes:
                probe = self._pick_probe(obs, mirror, candidate)
                if probe is not None:
                    self._probes_spent[candidate] = spent + 1
                    return AskValue(probe)
            return Guess(index=_position_of(obs, candidate))
        value_id = pick_greedy_value(obs, mirror, _contradiction_mode(obs, mirror))
        if value_id is None:
            return _forced_guess(obs, mirror, rng)
        return AskValue(value_id)

    def _pick_probe(self, obs: AgentObservation, mirror: Mirror, candidate: str) -> str | None:
        # A probe only has power when the candidate's label is definite:
        # Unknown survives both polarities and can never refute anything.
        candidate_labels = obs.labels[candidate]
        for value_id in valid_values(obs, _contradiction_mode(obs, mirror)):
            if candidate_labels.get(value_id, Label.UNKNOWN) is not Label.UNKNOWN:
                return value_id
        return None


@dataclass
class ScriptedAgent(EpisodeAgent):
    """Replays a fixed script; used for transcript fixtures and bridge parity.

    Script entries are either plain strings (one per post-upload turn) or
    ``{"upload_batch": k, "text": ...}`` to emit text during upload batch k.
    """

    script: Sequence[str | dict]
    name: str = "scripted"

    _play_lines: list[str] = field(default_factory=list, init=False)
    _upload_lines: dict[int, list[str]] = field(default_factory=dict, init=False)
    _cursor: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        for entry in self.script:
            if isinstance(entry, str):
                self._play_lines.append(entry)
            else:
                batch = int(entry["upload_batch"])
                self._upload_lines.setdefault(batch, []).append(str(entry["text"]))

    def upload_batch(
        self, items: Sequence[ItemDescriptor], batch_index: int, is_last: bool
    ) -> AgentAction:
        pending = self._upload_lines.get(batch_index)
        if pending:
            return AskText(pending.pop(0))
        return SignalEndAck()

    def act(self, obs: AgentObservation) -> AgentAction:
        if self._cursor >= len(self._play_lines):
            return AskText("")  # script exhausted; unmappable on purpose
        line = self._play_lines[self._cursor]
        self._cursor += 1
        return AskText(line)


BASELINE_AGENTS = {
    "random": RandomValidAgent,
    "greedy": GreedySplitAgent,
    "verifier": VerifierAgent,
}
