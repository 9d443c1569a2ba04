"""Simulation and evaluation engine for hidden-target identification games
over galleries of attribute-labeled items."""

from .catalog import (
    Catalog,
    Label,
    attrs_of,
    dump_catalog,
    load_catalog,
    normalize_text,
    resolve_question_text,
)
from .episodes import (
    Episode,
    EpisodeConfig,
    build_distractor_pool,
    generate_episode,
    gallery_size_stats,
    retrieve_by_value,
    similarity,
)
from .harness import RunConfig, Transcript, run_episode, run_suite
from .metrics import (
    AggregateReport,
    EpisodeScore,
    Outcome,
    aggregate,
    bootstrap_interval,
    score_episode,
)
from .oracle import NoiseMode, NoisePlan, make_oracle
from .protocol import (
    Phase,
    Question,
    TurnRecord,
    Verdict,
    VerdictKind,
    ViolationKind,
    classify_question,
    parse_terminal,
)
from .verification import (
    Constraint,
    ContradictionFlag,
    FeasibleSet,
    Polarity,
    apply_constraint,
    elimination_trace,
    ingest_turn,
    initial_feasible_set,
    is_uniquely_identified,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "Catalog",
    "Constraint",
    "ContradictionFlag",
    "Episode",
    "EpisodeConfig",
    "EpisodeScore",
    "FeasibleSet",
    "Label",
    "NoiseMode",
    "NoisePlan",
    "Outcome",
    "Phase",
    "Polarity",
    "Question",
    "RunConfig",
    "Transcript",
    "TurnRecord",
    "Verdict",
    "VerdictKind",
    "ViolationKind",
    "aggregate",
    "apply_constraint",
    "attrs_of",
    "bootstrap_interval",
    "build_distractor_pool",
    "classify_question",
    "dump_catalog",
    "elimination_trace",
    "gallery_size_stats",
    "generate_episode",
    "ingest_turn",
    "initial_feasible_set",
    "is_uniquely_identified",
    "load_catalog",
    "make_oracle",
    "normalize_text",
    "parse_terminal",
    "resolve_question_text",
    "retrieve_by_value",
    "run_episode",
    "run_suite",
    "score_episode",
    "similarity",
]
