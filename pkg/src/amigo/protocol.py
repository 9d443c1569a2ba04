"""Turn representation, the rule-based violation detector, and guess parsing.

The questioning protocol is enforced deterministically: every question is
checked against a fixed precedence of rules and either passes as valid or is
assigned exactly one violation kind.  Violations earn a Skip from the oracle
and reveal nothing; only valid turns feed the asked-attribute registry used
by the enumeration rule.

Rules enforced, in precedence order:

1. no questions before the end-of-upload signal (premature_question)
2. the question must map to known attribute values (unmappable_question)
3. exactly one new attribute per question (multiple_questions)
4. no references to gallery positions (index_reference)
5. no questions about off-limits attribute types (forbidden_attribute)
6. no cycling through values of an already-queried type, and no re-asking
   an answered value without a contradiction license
   (enumeration_across_turns)
7. no compound re-statements of already-confirmed values
   (compound_re_enumeration)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .catalog import Catalog, normalize_text, resolve_question_text, scan_mentions


class MalformedIndex(Exception):
    """Guess text matched the terminal prefix but the index is not a number."""


class Phase(Enum):
    UPLOAD = "upload"
    PLAY = "play"


class ViolationKind(Enum):
    FORBIDDEN_ATTRIBUTE = "forbidden_attribute"
    ENUMERATION_ACROSS_TURNS = "enumeration_across_turns"
    INDEX_REFERENCE = "index_reference"
    MULTIPLE_QUESTIONS = "multiple_questions"
    UNMAPPABLE_QUESTION = "unmappable_question"
    PREMATURE_QUESTION = "premature_question"
    PREMATURE_GUESS = "premature_guess"
    COMPOUND_RE_ENUMERATION = "compound_re_enumeration"


class VerdictKind(Enum):
    YES = "yes"
    NO = "no"
    UNSURE = "unsure"
    SKIP = "skip"


@dataclass(frozen=True, slots=True)
class Verdict:
    kind: VerdictKind
    violation: ViolationKind | None = None

    def __post_init__(self) -> None:
        if self.kind is VerdictKind.SKIP and self.violation is None:
            raise ValueError("Skip verdicts must carry a violation kind")
        if self.kind is not VerdictKind.SKIP and self.violation is not None:
            raise ValueError("only Skip verdicts carry a violation kind")


@dataclass(frozen=True, slots=True)
class Question:
    raw_text: str
    resolved_value: str | None
    referenced_values: frozenset[str]
    turn_index: int

    def __post_init__(self) -> None:
        if self.turn_index < 1:
            raise ValueError("turn_index starts at 1")
        if self.resolved_value is not None and self.resolved_value not in self.referenced_values:
            raise ValueError("resolved_value must be among referenced_values")


@dataclass(frozen=True, slots=True)
class TurnRecord:
    question: Question
    verdict: Verdict

    @property
    def is_valid(self) -> bool:
        return self.verdict.kind is not VerdictKind.SKIP


def build_question(catalog: Catalog, raw_text: str, turn_index: int) -> Question:
    """Construct a Question from free text.

    ``resolved_value`` comes from exact template/synonym resolution;
    ``referenced_values`` adds every value mentioned by canonical name or
    synonym, which is how compound questions are recognized.  When exact
    resolution fails but the text mentions exactly one value, that mention is
    promoted to the resolved value.
    """
    resolved = resolve_question_text(catalog, raw_text)
    referenced = set(scan_mentions(catalog, raw_text))
    if resolved is not None:
        referenced.add(resolved)
    elif len(referenced) == 1:
        resolved = next(iter(referenced))
    return Question(
        raw_text=raw_text,
        resolved_value=resolved,
        referenced_values=frozenset(referenced),
        turn_index=turn_index,
    )


def question_for_value(catalog: Catalog, value_id: str, turn_index: int) -> Question:
    """Question object for a structured ask of a single catalog value."""
    value = catalog.values[value_id]
    return Question(
        raw_text=value.question_templates[0],
        resolved_value=value_id,
        referenced_values=frozenset({value_id}),
        turn_index=turn_index,
    )


#: Patterns (over normalized text) that count as a gallery-position reference.
INDEX_REFERENCE_PATTERNS: tuple[str, ...] = (
    r"\b(?:image|dress|photo|picture|option|candidate) (?:number )?\d+\b",
    r"\b(?:first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth)"
    r" (?:image|dress|photo|picture|option|candidate|one)\b",
    r"\b(?:index|position|number) \d+\b",
)

_INDEX_REFERENCE = re.compile("|".join(f"(?:{p})" for p in INDEX_REFERENCE_PATTERNS))


def mentions_gallery_index(text: str) -> bool:
    return _INDEX_REFERENCE.search(normalize_text(text)) is not None


def confirmed_values(history: Sequence[TurnRecord]) -> frozenset[str]:
    """Values answered Yes in prior valid turns."""
    return frozenset(
        turn.question.resolved_value
        for turn in history
        if turn.verdict.kind is VerdictKind.YES and turn.question.resolved_value
    )


def asked_registry(history: Sequence[TurnRecord], catalog: Catalog) -> dict[str, set[str]]:
    """type id -> value ids queried in valid turns.

    Skip turns reveal nothing and therefore never seed the registry.
    """
    registry: dict[str, set[str]] = {}
    for turn in history:
        if not turn.is_valid:
            continue
        value_id = turn.question.resolved_value
        if value_id is None:
            continue
        type_id = catalog.values[value_id].type_id
        registry.setdefault(type_id, set()).add(value_id)
    return registry


def classify_question(
    catalog: Catalog,
    question: Question,
    history: Sequence[TurnRecord],
    phase: Phase,
    contradiction_mode: bool,
) -> ViolationKind | None:
    """First matching rule in precedence order; None means the question is valid.

    ``contradiction_mode`` licenses re-asking the exact value of an earlier
    valid turn (and nothing broader), so a detected inconsistency can be
    re-verified without permanently unlocking repeats.
    """
    if phase is Phase.UPLOAD:
        return ViolationKind.PREMATURE_QUESTION
    referenced = question.referenced_values
    if not referenced:
        return ViolationKind.UNMAPPABLE_QUESTION
    confirmed = confirmed_values(history)
    if len(referenced) > 1 and not referenced <= confirmed:
        return ViolationKind.MULTIPLE_QUESTIONS
    if mentions_gallery_index(question.raw_text):
        return ViolationKind.INDEX_REFERENCE
    if any(catalog.type_of(v).forbidden for v in referenced):
        return ViolationKind.FORBIDDEN_ATTRIBUTE
    registry = asked_registry(history, catalog)
    for value_id in referenced:
        prior = registry.get(catalog.values[value_id].type_id)
        if not prior:
            continue
        if any(other != value_id for other in prior):
            return ViolationKind.ENUMERATION_ACROSS_TURNS
        if len(referenced) == 1 and not contradiction_mode:
            return ViolationKind.ENUMERATION_ACROSS_TURNS
    if len(referenced) > 1:
        return ViolationKind.COMPOUND_RE_ENUMERATION
    return None


GUESS_PREFIX = "My guess of your favorite dress:"

_GUESS_RE = re.compile(
    r"^My guess of your favorite dress:\s*#(?P<index>\S*?)\.?$"
)


@dataclass(frozen=True, slots=True)
class GuessOutput:
    index: int  # 1-based gallery position


@dataclass(frozen=True, slots=True)
class TerminalGuess:
    output: GuessOutput
    premature: bool  # emitted while the feasible set still had more than one member

    @property
    def violation(self) -> ViolationKind | None:
        return ViolationKind.PREMATURE_GUESS if self.premature else None


def parse_terminal(text: str, feasible_size: int) -> TerminalGuess | None:
    """Parse a terminal guess line.

    Returns None when the text is not a guess at all.  A guess emitted while
    the feasible set still holds more than one candidate is flagged premature
    but still terminates the episode.  Raises MalformedIndex when the prefix
    matches but the index is not a positive number.
    """
    match = _GUESS_RE.match(text.strip())
    if match is None:
        return None
    raw_index = match.group("index")
    if not raw_index.isdigit() or int(raw_index) < 1:
        raise MalformedIndex(f"guess index {raw_index!r} is not a positive number")
    return TerminalGuess(
        output=GuessOutput(index=int(raw_index)),
        premature=feasible_size > 1,
    )


def format_guess(index: int) -> str:
    """Canonical terminal guess line for a 1-based gallery position."""
    return f"{GUESS_PREFIX} #{index}."
