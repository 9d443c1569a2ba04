"""Constraint accumulation, feasible-set tracking, and contradiction detection.

Every valid Yes/No exchange becomes a hard constraint over the gallery:
Yes keeps items labeled Present or Unknown for the value, No keeps Absent or
Unknown.  Unknown survives both polarities so labeling gaps can never
silently delete the hidden target.  Unsure and Skip turns contribute nothing
beyond a same-size history entry.

Contradictions surface two ways: the feasible set runs empty, or a value
receives both polarities across turns.  The active flag licenses the next
turn to re-ask an exact value (contradiction mode).  When a re-ask comes
back with the opposite polarity, the newer answer supersedes the old
constraint and the set is rebuilt from the corrected constraint list; the
rebuild is the one place the member count may grow, and it is marked as
such in the history.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .catalog import Catalog, Label
from .protocol import Question, Verdict, VerdictKind


class Polarity(Enum):
    MUST_HAVE = "must_have"
    MUST_LACK = "must_lack"


class ContradictionCause(Enum):
    EMPTY_SET = "empty_set"
    DIRECT_CONFLICT = "direct_conflict"


@dataclass(frozen=True, slots=True)
class Constraint:
    value_id: str
    polarity: Polarity
    source_turn: int


@dataclass(frozen=True, slots=True)
class ContradictionFlag:
    active: bool
    cause: ContradictionCause | None = None
    turn_raised: int | None = None

    def __post_init__(self) -> None:
        if self.active and (self.cause is None or self.turn_raised is None):
            raise ValueError("active contradiction flags carry a cause and a turn")


INACTIVE = ContradictionFlag(active=False)


@dataclass(frozen=True, slots=True)
class HistoryEntry:
    turn_index: int
    size_after: int
    rebuilt: bool = False


@dataclass(frozen=True, slots=True)
class FeasibleSet:
    members: frozenset[str]
    gallery: tuple[str, ...]
    history: tuple[HistoryEntry, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    flag: ContradictionFlag = INACTIVE


def initial_feasible_set(gallery: Iterable[str]) -> FeasibleSet:
    ordered = tuple(gallery)
    return FeasibleSet(members=frozenset(ordered), gallery=ordered)


def satisfies(labels: Mapping[str, Label], constraint: Constraint) -> bool:
    """Whether an item's labels are compatible with the constraint.

    Unknown is compatible with both polarities.
    """
    label = labels.get(constraint.value_id, Label.UNKNOWN)
    if constraint.polarity is Polarity.MUST_HAVE:
        return label is not Label.ABSENT
    return label is not Label.PRESENT


def filter_members(
    catalog: Catalog, members: Iterable[str], constraints: Iterable[Constraint]
) -> frozenset[str]:
    constraint_list = list(constraints)
    return frozenset(
        item_id
        for item_id in members
        if all(satisfies(catalog.item(item_id).labels, c) for c in constraint_list)
    )


def apply_constraint(fs: FeasibleSet, constraint: Constraint, catalog: Catalog) -> FeasibleSet:
    """Intersect the members with the constraint; purely conjunctive."""
    members = filter_members(catalog, fs.members, [constraint])
    return FeasibleSet(
        members=members,
        gallery=fs.gallery,
        history=fs.history + (HistoryEntry(constraint.source_turn, len(members)),),
        constraints=fs.constraints + (constraint,),
        flag=fs.flag,
    )


def _polarity_for(kind: VerdictKind) -> Polarity:
    return Polarity.MUST_HAVE if kind is VerdictKind.YES else Polarity.MUST_LACK


def _next_flag(
    fs: FeasibleSet, members: frozenset[str], turn_index: int, direct_conflict: bool
) -> ContradictionFlag:
    if direct_conflict:
        return ContradictionFlag(
            active=True, cause=ContradictionCause.DIRECT_CONFLICT, turn_raised=turn_index
        )
    if not members:
        # Keep the turn the empty streak started on.
        if fs.flag.active and fs.flag.cause is ContradictionCause.EMPTY_SET and not fs.members:
            return fs.flag
        return ContradictionFlag(
            active=True, cause=ContradictionCause.EMPTY_SET, turn_raised=turn_index
        )
    return INACTIVE


def ingest_turn(
    fs: FeasibleSet, question: Question, verdict: Verdict, catalog: Catalog
) -> tuple[FeasibleSet, ContradictionFlag]:
    """Fold one turn into the feasible set.

    Skip and Unsure leave the members untouched (same-size history entry).
    Yes/No add a constraint on the resolved value.  A repeated answer on the
    same value dedupes; an opposite answer supersedes the old constraint and
    rebuilds the set from the corrected constraint list.
    """
    turn_index = question.turn_index
    if verdict.kind in (VerdictKind.SKIP, VerdictKind.UNSURE):
        flag = _next_flag(fs, fs.members, turn_index, direct_conflict=False)
        updated = FeasibleSet(
            members=fs.members,
            gallery=fs.gallery,
            history=fs.history + (HistoryEntry(turn_index, len(fs.members)),),
            constraints=fs.constraints,
            flag=flag,
        )
        return updated, flag

    value_id = question.resolved_value
    if value_id is None:
        raise ValueError("informative verdict on a turn with no resolved value")
    polarity = _polarity_for(verdict.kind)
    existing = next((c for c in fs.constraints if c.value_id == value_id), None)

    if existing is None:
        constraint = Constraint(value_id, polarity, turn_index)
        members = filter_members(catalog, fs.members, [constraint])
        flag = _next_flag(fs, members, turn_index, direct_conflict=False)
        updated = FeasibleSet(
            members=members,
            gallery=fs.gallery,
            history=fs.history + (HistoryEntry(turn_index, len(members)),),
            constraints=fs.constraints + (constraint,),
            flag=flag,
        )
        return updated, flag

    if existing.polarity is polarity:
        # Re-verified answer agrees; nothing new to apply.
        flag = _next_flag(fs, fs.members, turn_index, direct_conflict=False)
        updated = FeasibleSet(
            members=fs.members,
            gallery=fs.gallery,
            history=fs.history + (HistoryEntry(turn_index, len(fs.members)),),
            constraints=fs.constraints,
            flag=flag,
        )
        return updated, flag

    # Opposite polarity on an already-constrained value: the re-ask refutes
    # the earlier answer.  The newer answer supersedes and the member set is
    # rebuilt from scratch, which may resurrect previously eliminated items.
    replacement = Constraint(value_id, polarity, turn_index)
    constraints = tuple(
        replacement if c.value_id == value_id else c for c in fs.constraints
    )
    members = filter_members(catalog, fs.gallery, constraints)
    flag = _next_flag(fs, members, turn_index, direct_conflict=True)
    updated = FeasibleSet(
        members=members,
        gallery=fs.gallery,
        history=fs.history + (HistoryEntry(turn_index, len(members), rebuilt=True),),
        constraints=constraints,
        flag=flag,
    )
    return updated, flag


def is_uniquely_identified(fs: FeasibleSet) -> tuple[bool, str | None]:
    """(True, item id) when exactly one candidate remains.

    An empty set is a contradiction, not an identification.
    """
    if len(fs.members) == 1:
        return True, next(iter(fs.members))
    return False, None


@dataclass(frozen=True, slots=True)
class TraceStep:
    turn_index: int
    size_after: int
    eliminated_count: int


def elimination_trace(fs: FeasibleSet) -> list[TraceStep]:
    """Per-turn elimination deltas; a zero on an informative turn is a stall."""
    steps: list[TraceStep] = []
    previous = len(fs.gallery)
    for entry in fs.history:
        steps.append(
            TraceStep(
                turn_index=entry.turn_index,
                size_after=entry.size_after,
                eliminated_count=previous - entry.size_after,
            )
        )
        previous = entry.size_after
    return steps
