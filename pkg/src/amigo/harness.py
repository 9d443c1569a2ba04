"""Episode runner: upload phase, questioning loop, transcripts, and suites.

One episode is a strictly sequential loop: the gallery is delivered in
upload batches (outputs during upload are logged as premature and never
answered), the end-of-upload signal opens the questioning phase, and each
turn runs agent action -> violation check -> oracle or Skip -> feasible-set
update -> contradiction propagation, until a parsed guess, budget
exhaustion, or agent abort.  The transcript captures everything scoring
needs, so episodes can be re-scored offline without engine state.

Suites run episodes with bounded parallelism, persist one transcript file
per episode plus a digest manifest, and aggregate scores.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import metrics
from .agents import (
    AgentAction,
    AgentObservation,
    AskText,
    AskValue,
    BASELINE_AGENTS,
    EpisodeAgent,
    Guess,
    ItemDescriptor,
    ScriptedAgent,
    SignalEndAck,
)
from .catalog import Catalog, gallery_labels
from .episodes import Episode
from .metrics import EpisodeScore, score_episode
from .oracle import NoiseMode, NoisePlan, answer, make_oracle
from .protocol import (
    MalformedIndex,
    Phase,
    Question,
    TerminalGuess,
    TurnRecord,
    Verdict,
    VerdictKind,
    ViolationKind,
    build_question,
    classify_question,
    format_guess,
    parse_terminal,
    question_for_value,
)
from .rng import derive_seed
from .verification import (
    FeasibleSet,
    initial_feasible_set,
    ingest_turn,
    is_uniquely_identified,
)


class AgentProtocolError(Exception):
    """The agent side broke the interaction contract (bad message, timeout)."""


@dataclass(frozen=True, slots=True)
class RunConfig:
    agent: str = "greedy"
    budget: int = 20
    noise_mode: NoiseMode = NoiseMode.NONE
    noise_seed: int = 0
    noise_turn: int | None = None  # pin the rewrite to a turn; None: seeded slot
    seed: int = 0
    batch_plan: tuple[int, ...] | None = None  # None: single batch
    out_dir: str | None = None
    parallelism: int = 1
    turn_timeout: float | None = None  # seconds, external agents only
    media_refs: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


@dataclass(frozen=True, slots=True)
class PrematureOutput:
    batch_index: int
    text: str
    marker: str  # would-be classification: premature_question or premature_guess


@dataclass(frozen=True, slots=True)
class TranscriptTurn:
    turn_index: int
    action_kind: str  # ask_value | ask_text
    raw_text: str
    resolved_value: str | None
    classification: str  # "valid" or a violation kind
    verdict: str  # yes | no | unsure | skip
    violation: str | None
    feasible_size_after: int
    unique_candidate: str | None
    rebuilt: bool
    contradiction: str | None  # empty_set | direct_conflict when flagged this turn
    elapsed_s: float = 0.0


@dataclass(frozen=True, slots=True)
class GuessRecord:
    turn_index: int
    index: int
    raw_text: str
    premature: bool
    forced: bool


@dataclass(frozen=True, slots=True)
class Transcript:
    episode_id: str
    agent_name: str
    tau: float
    gallery: tuple[str, ...]
    target_position: int
    budget: int
    noise_mode: str
    upload_batches: tuple[int, ...]
    premature_outputs: tuple[PrematureOutput, ...]
    turns: tuple[TranscriptTurn, ...]
    guess: GuessRecord | None
    applied_log: tuple[tuple[int, str, str], ...]
    status: str  # guessed | budget_exhausted | aborted
    abort_reason: str | None = None

    @property
    def feasible_size_before_guess(self) -> int:
        if self.turns:
            return self.turns[-1].feasible_size_after
        return len(self.gallery)

    @property
    def unique_candidate_before_guess(self) -> str | None:
        if self.turns:
            return self.turns[-1].unique_candidate
        return None


def transcript_to_dict(transcript: Transcript, include_timing: bool = True) -> dict:
    doc = {
        "episode_id": transcript.episode_id,
        "agent_name": transcript.agent_name,
        "tau": transcript.tau,
        "gallery": list(transcript.gallery),
        "target_position": transcript.target_position,
        "budget": transcript.budget,
        "noise_mode": transcript.noise_mode,
        "upload_batches": list(transcript.upload_batches),
        "premature_outputs": [
            {"batch_index": p.batch_index, "text": p.text, "marker": p.marker}
            for p in transcript.premature_outputs
        ],
        "turns": [
            {
                "turn_index": t.turn_index,
                "action_kind": t.action_kind,
                "raw_text": t.raw_text,
                "resolved_value": t.resolved_value,
                "classification": t.classification,
                "verdict": t.verdict,
                "violation": t.violation,
                "feasible_size_after": t.feasible_size_after,
                "unique_candidate": t.unique_candidate,
                "rebuilt": t.rebuilt,
                "contradiction": t.contradiction,
                **({"elapsed_s": t.elapsed_s} if include_timing else {}),
            }
            for t in transcript.turns
        ],
        "guess": (
            {
                "turn_index": transcript.guess.turn_index,
                "index": transcript.guess.index,
                "raw_text": transcript.guess.raw_text,
                "premature": transcript.guess.premature,
                "forced": transcript.guess.forced,
            }
            if transcript.guess
            else None
        ),
        "applied_log": [list(entry) for entry in transcript.applied_log],
        "status": transcript.status,
        "abort_reason": transcript.abort_reason,
    }
    return doc


def transcript_from_dict(doc: dict) -> Transcript:
    return Transcript(
        episode_id=doc["episode_id"],
        agent_name=doc["agent_name"],
        tau=float(doc["tau"]),
        gallery=tuple(doc["gallery"]),
        target_position=int(doc["target_position"]),
        budget=int(doc["budget"]),
        noise_mode=doc["noise_mode"],
        upload_batches=tuple(doc["upload_batches"]),
        premature_outputs=tuple(
            PrematureOutput(p["batch_index"], p["text"], p["marker"])
            for p in doc["premature_outputs"]
        ),
        turns=tuple(
            TranscriptTurn(
                turn_index=t["turn_index"],
                action_kind=t["action_kind"],
                raw_text=t["raw_text"],
                resolved_value=t["resolved_value"],
                classification=t["classification"],
                verdict=t["verdict"],
                violation=t["violation"],
                feasible_size_after=t["feasible_size_after"],
                unique_candidate=t["unique_candidate"],
                rebuilt=t["rebuilt"],
                contradiction=t["contradiction"],
                elapsed_s=t.get("elapsed_s", 0.0),
            )
            for t in doc["turns"]
        ),
        guess=(
            GuessRecord(
                turn_index=doc["guess"]["turn_index"],
                index=doc["guess"]["index"],
                raw_text=doc["guess"]["raw_text"],
                premature=doc["guess"]["premature"],
                forced=doc["guess"]["forced"],
            )
            if doc["guess"]
            else None
        ),
        applied_log=tuple(
            (int(e[0]), str(e[1]), str(e[2])) for e in doc["applied_log"]
        ),
        status=doc["status"],
        abort_reason=doc.get("abort_reason"),
    )


def canonical_transcript_bytes(transcript: Transcript, include_timing: bool = False) -> bytes:
    """Stable byte form; timing fields are excluded by default so determinism
    comparisons ignore wall-clock noise."""
    doc = transcript_to_dict(transcript, include_timing=include_timing)
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def validate_transcript(transcript: Transcript) -> None:
    """Structural invariants: strictly increasing turns, monotone elimination
    except across marked rebuild turns, Skip neutrality."""
    previous_index = 0
    previous_size = len(transcript.gallery)
    for turn in transcript.turns:
        if turn.turn_index <= previous_index:
            raise metrics.InconsistentTranscript(
                f"turn index {turn.turn_index} after {previous_index}"
            )
        if not turn.rebuilt and turn.feasible_size_after > previous_size:
            raise metrics.InconsistentTranscript(
                f"feasible set grew at turn {turn.turn_index} without a rebuild"
            )
        if turn.verdict == "skip" and turn.feasible_size_after != previous_size:
            raise metrics.InconsistentTranscript(
                f"Skip turn {turn.turn_index} changed the feasible set"
            )
        previous_index = turn.turn_index
        previous_size = turn.feasible_size_after


# --------------------------------------------------------------------------
# Episode loop
# --------------------------------------------------------------------------


def _batch_sizes(plan: tuple[int, ...] | None, gallery_size: int) -> list[int]:
    if plan is None:
        return [gallery_size]
    if sum(plan) != gallery_size or any(size < 1 for size in plan):
        raise ValueError(f"batch plan {plan} does not partition a gallery of {gallery_size}")
    return list(plan)


def _descriptors(
    episode: Episode, start: int, size: int, media: Mapping[str, str] | None
) -> list[ItemDescriptor]:
    out = []
    for offset in range(size):
        position = start + offset + 1
        item_id = episode.gallery[position - 1]
        out.append(
            ItemDescriptor(
                item_id=item_id,
                position=position,
                media=media.get(item_id) if media else None,
            )
        )
    return out


def _premature_marker(text: str) -> str:
    try:
        if parse_terminal(text, feasible_size=2) is not None:
            return ViolationKind.PREMATURE_GUESS.value
    except MalformedIndex:
        pass
    return ViolationKind.PREMATURE_QUESTION.value


def _question_for_action(
    catalog: Catalog, action: AskValue | AskText, turn_index: int
) -> Question:
    if isinstance(action, AskValue):
        if action.value_id not in catalog.values:
            # Unknown ids cannot be mapped to any attribute; classify as such.
            return Question(
                raw_text=action.value_id,
                resolved_value=None,
                referenced_values=frozenset(),
                turn_index=turn_index,
            )
        return question_for_value(catalog, action.value_id, turn_index)
    return build_question(catalog, action.text, turn_index)


def run_episode(
    catalog: Catalog,
    episode: Episode,
    agent: EpisodeAgent,
    config: RunConfig,
) -> Transcript:
    """Drive one full episode and return its transcript.

    Malformed wire traffic or a per-turn timeout ends the episode as an
    aborted-but-scoreable transcript instead of raising.
    """
    plan = NoisePlan(
        mode=config.noise_mode,
        affected_turn=config.noise_turn,
        seed=derive_seed(config.noise_seed, episode.episode_id, "noise"),
    )
    oracle_state = make_oracle(catalog, episode.target_id, plan, config.budget)
    fs = initial_feasible_set(episode.gallery)
    labels = gallery_labels(catalog, episode.gallery)

    premature: list[PrematureOutput] = []
    turns: list[TranscriptTurn] = []
    history: list[TurnRecord] = []
    guess_record: GuessRecord | None = None
    status = "budget_exhausted"
    abort_reason: str | None = None
    contradiction_mode = False

    batch_sizes = _batch_sizes(config.batch_plan, len(episode.gallery))

    def finish(outcome_status: str) -> Transcript:
        transcript = Transcript(
            episode_id=episode.episode_id,
            agent_name=agent.name,
            tau=episode.config.tau,
            gallery=episode.gallery,
            target_position=episode.target_position,
            budget=config.budget,
            noise_mode=config.noise_mode.value,
            upload_batches=tuple(batch_sizes),
            premature_outputs=tuple(premature),
            turns=tuple(turns),
            guess=guess_record,
            applied_log=tuple(
                (entry.turn_index, entry.original.value, entry.emitted.value)
                for entry in oracle_state.applied_log
            ),
            status=outcome_status,
            abort_reason=abort_reason,
        )
        validate_transcript(transcript)
        try:
            agent.episode_end(score_episode(transcript).outcome.value)
        except AgentProtocolError:
            pass
        return transcript

    # Upload phase: outputs here are premature, logged, and never answered.
    try:
        offset = 0
        for batch_index, size in enumerate(batch_sizes, start=1):
            items = _descriptors(episode, offset, size, config.media_refs)
            offset += size
            reaction = agent.upload_batch(items, batch_index, batch_index == len(batch_sizes))
            if not isinstance(reaction, SignalEndAck):
                text = _action_text(reaction)
                premature.append(
                    PrematureOutput(
                        batch_index=batch_index, text=text, marker=_premature_marker(text)
                    )
                )
    except AgentProtocolError as exc:
        abort_reason = str(exc)
        return finish("aborted")

    # Questioning loop.
    for turn_index in range(1, config.budget + 1):
        obs = AgentObservation(
            gallery=episode.gallery,
            labels=labels,
            catalog=catalog,
            history=tuple(history),
            phase=Phase.PLAY,
            budget_remaining=config.budget - turn_index + 1,
        )
        started = time.monotonic()
        try:
            action = agent.act(obs)
        except AgentProtocolError as exc:
            abort_reason = str(exc)
            return finish("aborted")
        elapsed = time.monotonic() - started

        terminal = _as_terminal(action, fs)
        if terminal is not None:
            raw_text, parsed, forced = terminal
            guess_record = GuessRecord(
                turn_index=turn_index,
                index=parsed.output.index,
                raw_text=raw_text,
                premature=parsed.premature,
                forced=forced,
            )
            return finish("guessed")

        if isinstance(action, SignalEndAck):
            # An ack during play maps to nothing askable; treat as unmappable.
            action = AskText("")

        question = _question_for_action(catalog, action, turn_index)
        kind = classify_question(catalog, question, history, Phase.PLAY, contradiction_mode)
        if kind is not None:
            verdict = Verdict(kind=VerdictKind.SKIP, violation=kind)
        else:
            assert question.resolved_value is not None
            verdict = answer(oracle_state, question.resolved_value, turn_index)

        fs, flag = ingest_turn(fs, question, verdict, catalog)
        contradiction_mode = flag.active
        unique, candidate = is_uniquely_identified(fs)
        entry = fs.history[-1]
        turns.append(
            TranscriptTurn(
                turn_index=turn_index,
                action_kind="ask_value" if isinstance(action, AskValue) else "ask_text",
                raw_text=question.raw_text,
                resolved_value=question.resolved_value,
                classification="valid" if kind is None else kind.value,
                verdict=verdict.kind.value,
                violation=verdict.violation.value if verdict.violation else None,
                feasible_size_after=len(fs.members),
                unique_candidate=candidate if unique else None,
                rebuilt=entry.rebuilt,
                contradiction=flag.cause.value if flag.active else None,
                elapsed_s=elapsed,
            )
        )
        record = TurnRecord(question=question, verdict=verdict)
        history.append(record)
        try:
            agent.notify_verdict(
                turn_index,
                verdict.kind.value,
                verdict.violation.value if verdict.violation else None,
            )
        except AgentProtocolError as exc:
            abort_reason = str(exc)
            return finish("aborted")

    return finish(status)


def _action_text(action: AgentAction) -> str:
    if isinstance(action, AskText):
        return action.text
    if isinstance(action, AskValue):
        return action.value_id
    if isinstance(action, Guess):
        return format_guess(action.index)
    return ""


def _as_terminal(
    action: AgentAction, fs: FeasibleSet
) -> tuple[str, TerminalGuess, bool] | None:
    """(raw text, parsed guess, forced) when the action terminates the episode."""
    if isinstance(action, Guess):
        text = format_guess(action.index)
        parsed = parse_terminal(text, feasible_size=len(fs.members))
        assert parsed is not None
        return text, parsed, action.forced
    if isinstance(action, AskText):
        try:
            parsed = parse_terminal(action.text, feasible_size=len(fs.members))
        except MalformedIndex:
            return None  # falls through to question handling as unmappable
        if parsed is not None:
            return action.text, parsed, False
    return None


# --------------------------------------------------------------------------
# Suites
# --------------------------------------------------------------------------

AgentFactory = Callable[[Episode], EpisodeAgent]


def agent_factory(name: str, config: RunConfig, script: Sequence | None = None) -> AgentFactory:
    """Factory for the registered agent names (random, greedy, verifier,
    scripted); the external wire agent is constructed by the CLI layer."""
    if name == "scripted":
        if script is None:
            raise ValueError("scripted agent needs a script")
        return lambda episode: ScriptedAgent(script=list(script))
    try:
        cls = BASELINE_AGENTS[name]
    except KeyError:
        raise ValueError(f"unknown agent {name!r}") from None
    return lambda episode: cls(seed=derive_seed(config.seed, episode.episode_id, "agent"))


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    episode_id: str
    status: str
    path: str | None
    sha256: str | None
    error: str | None = None


@dataclass
class SuiteResult:
    transcripts: list[Transcript]
    scores: list[EpisodeScore]
    report: metrics.AggregateReport
    manifest: list[ManifestEntry] = field(default_factory=list)


def run_suite(
    catalog: Catalog,
    episodes: Sequence[Episode],
    make_agent: AgentFactory,
    config: RunConfig,
) -> SuiteResult:
    """Run all episodes (optionally in parallel) and aggregate the scores.

    Per-episode failures land in the manifest without aborting the suite.
    """
    results: dict[str, Transcript | Exception] = {}

    def run_one(episode: Episode) -> None:
        try:
            results[episode.episode_id] = run_episode(
                catalog, episode, make_agent(episode), config
            )
        except Exception as exc:  # noqa: BLE001 - surfaced via the manifest
            results[episode.episode_id] = exc

    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            list(pool.map(run_one, episodes))
    else:
        for episode in episodes:
            run_one(episode)

    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        (out_dir / "transcripts").mkdir(parents=True, exist_ok=True)

    transcripts: list[Transcript] = []
    manifest: list[ManifestEntry] = []
    for episode in episodes:
        result = results[episode.episode_id]
        if isinstance(result, Exception):
            manifest.append(
                ManifestEntry(
                    episode_id=episode.episode_id,
                    status="error",
                    path=None,
                    sha256=None,
                    error=f"{type(result).__name__}: {result}",
                )
            )
            continue
        transcripts.append(result)
        path_str = digest = None
        if out_dir is not None:
            payload = (
                json.dumps(transcript_to_dict(result), separators=(",", ":")) + "\n"
            ).encode("utf-8")
            path = out_dir / "transcripts" / f"{episode.episode_id}.json"
            path.write_bytes(payload)
            path_str = str(path.relative_to(out_dir))
            digest = hashlib.sha256(payload).hexdigest()
        manifest.append(
            ManifestEntry(
                episode_id=episode.episode_id,
                status=result.status,
                path=path_str,
                sha256=digest,
            )
        )

    if out_dir is not None:
        manifest_doc = [
            {
                "episode_id": e.episode_id,
                "status": e.status,
                "path": e.path,
                "sha256": e.sha256,
                "error": e.error,
            }
            for e in manifest
        ]
        (out_dir / "manifest.json").write_text(json.dumps(manifest_doc, indent=2) + "\n")
    scores = [score_episode(t) for t in transcripts]
    # An empty suite still persists its (empty) manifest; the aggregation
    # error surfaces to the caller.
    report = metrics.aggregate(scores)
    return SuiteResult(transcripts=transcripts, scores=scores, report=report, manifest=manifest)


def load_transcripts(out_dir: str | Path) -> list[Transcript]:
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    transcripts = []
    if manifest_path.exists():
        for entry in json.loads(manifest_path.read_text()):
            if entry.get("path"):
                doc = json.loads((out / entry["path"]).read_text())
                transcripts.append(transcript_from_dict(doc))
    else:
        for path in sorted(out.glob("transcripts/*.json")):
            transcripts.append(transcript_from_dict(json.loads(path.read_text())))
    return transcripts
