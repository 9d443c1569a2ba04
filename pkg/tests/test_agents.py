from __future__ import annotations

import pytest

from amigo.agents import (
    AgentObservation,
    AskValue,
    Guess,
    GreedySplitAgent,
    RandomValidAgent,
    VerifierAgent,
    rebuild_mirror,
    valid_values,
)
from amigo.catalog import gallery_labels
from amigo.harness import RunConfig, run_episode
from amigo.metrics import Outcome, score_episode
from amigo.protocol import Phase, TurnRecord, Verdict, VerdictKind, build_question

from conftest import (
    binary_code_catalog,
    catalog_from_doc,
    make_doc,
    make_episode,
    replay_fixture_short,
    sparse_label_catalog,
)


def observation(catalog, gallery, history=(), budget_remaining=20):
    return AgentObservation(
        gallery=tuple(gallery),
        labels=gallery_labels(catalog, gallery),
        catalog=catalog,
        history=tuple(history),
        phase=Phase.PLAY,
        budget_remaining=budget_remaining,
    )


@pytest.fixture(scope="module")
def short_fixture():
    return replay_fixture_short()


def test_random_agent_never_asks_forbidden_values(short_fixture) -> None:
    catalog = short_fixture["catalog"]
    obs = observation(catalog, short_fixture["gallery"])
    forbidden = {
        v.id for v in catalog.values.values() if catalog.types[v.type_id].forbidden
    }
    for seed in range(200):
        action = RandomValidAgent(seed=seed).act(obs)
        assert isinstance(action, AskValue)
        assert action.value_id not in forbidden


def test_random_agent_guesses_singleton_mirror(short_fixture) -> None:
    catalog = short_fixture["catalog"]
    gallery = short_fixture["gallery"]
    history = [
        _record(catalog, "Does the dress have a tiered skirt?", 1, VerdictKind.NO),
        _record(catalog, "Does the dress have a high-low hemline?", 2, VerdictKind.NO),
    ]
    obs = observation(catalog, gallery, history)
    mirror = rebuild_mirror(obs)
    assert len(mirror.members) == 1 and mirror.members[0] == "g03"
    action = RandomValidAgent(seed=0).act(obs)
    assert action == Guess(index=3)


def test_random_agent_is_deterministic_per_seed(short_fixture) -> None:
    catalog = short_fixture["catalog"]
    obs = observation(catalog, short_fixture["gallery"])
    actions = {RandomValidAgent(seed=99).act(obs) for _ in range(5)}
    assert len(actions) == 1


def _record(catalog, text, turn, kind):
    return TurnRecord(
        question=build_question(catalog, text, turn),
        verdict=Verdict(kind=kind),
    )


def test_greedy_prefers_most_balanced_split() -> None:
    # v0 splits the six members 3/3; v1 splits 5/1.
    values = [
        ("v0", "t0", "balanced", ["balanced?"]),
        ("v1", "t1", "lopsided", ["lopsided?"]),
        ("vz", "t2", "ubiquitous", ["ubiquitous?"]),
    ]
    types = [("t0", "T0", False), ("t1", "T1", False), ("t2", "T2", False)]
    items = []
    for k in range(6):
        items.append(
            (
                f"i{k}",
                {
                    "v0": "present" if k < 3 else "absent",
                    "v1": "present" if k < 5 else "absent",
                    "vz": "present",
                },
            )
        )
    catalog = catalog_from_doc(make_doc(types, values, items))
    obs = observation(catalog, [i[0] for i in items])
    action = GreedySplitAgent().act(obs)
    assert action == AskValue("v0")


def test_greedy_tie_breaks_on_unknowns_then_id() -> None:
    values = [
        ("va", "t0", "clean", ["clean?"]),
        ("vb", "t1", "fuzzy", ["fuzzy?"]),
        ("vz", "t2", "ubiquitous", ["ubiquitous?"]),
    ]
    types = [("t0", "T0", False), ("t1", "T1", False), ("t2", "T2", False)]
    # Both split 1/1 over the labeled members, but vb leaves two unknowns.
    items = [
        ("i0", {"va": "present", "vb": "present", "vz": "present"}),
        ("i1", {"va": "absent", "vb": "absent", "vz": "present"}),
        ("i2", {"va": "present", "vb": "unknown", "vz": "present"}),
        ("i3", {"va": "absent", "vb": "unknown", "vz": "present"}),
    ]
    catalog = catalog_from_doc(make_doc(types, values, items))
    obs = observation(catalog, [i[0] for i in items])
    # va: P=2 A=2 diff 0 unknowns 0; vb: P=1 A=1 diff 0 unknowns 2.
    assert GreedySplitAgent().act(obs) == AskValue("va")


def test_greedy_forced_guess_when_no_split_power() -> None:
    values = [("v0", "t0", "flat", ["flat?"])]
    items = [("i0", {"v0": "present"}), ("i1", {"v0": "present"})]
    catalog = catalog_from_doc(make_doc([("t0", "T0", False)], values, items))
    obs = observation(catalog, ["i0", "i1"])
    action = GreedySplitAgent(seed=3).act(obs)
    assert isinstance(action, Guess) and action.forced


def test_greedy_identifies_every_target_in_complete_code() -> None:
    # Exhaustive: all eight targets of an 8-item fully discriminating
    # catalog must be verified-identified within three questions.
    catalog = binary_code_catalog(8)
    gallery = sorted(catalog.items)
    for position, target in enumerate(gallery, start=1):
        episode = make_episode(gallery, position, seed=position)
        transcript = run_episode(catalog, episode, GreedySplitAgent(), RunConfig())
        score = score_episode(transcript)
        assert score.outcome is Outcome.VERIFIED_CORRECT
        assert score.turns_total <= 3
        assert score.skip_count == 0


def test_verifier_narrows_like_greedy_then_probes() -> None:
    catalog = sparse_label_catalog()
    gallery = sorted(catalog.items)[:8]
    episode = make_episode(gallery, 4, seed=17)
    config = RunConfig()
    greedy_t = run_episode(catalog, episode, GreedySplitAgent(seed=5), config)
    verifier_t = run_episode(catalog, episode, VerifierAgent(seed=5), config)
    # Identical narrowing prefix, then verification probes, then the same guess.
    n = len(greedy_t.turns)
    assert [t.raw_text for t in verifier_t.turns[:n]] == [t.raw_text for t in greedy_t.turns]
    assert len(verifier_t.turns) == n + 2  # default probe count
    assert greedy_t.guess.index == verifier_t.guess.index
    assert score_episode(verifier_t).outcome is Outcome.VERIFIED_CORRECT


def test_verifier_reasks_oldest_constraint_on_contradiction() -> None:
    # Two items, two values; the second answer contradicts every candidate
    # left by the first, so the mirror runs empty.
    types = [("t0", "T0", False), ("t1", "T1", False)]
    values = [("v0", "t0", "first cue", ["first cue?"]),
              ("v1", "t1", "second cue", ["second cue?"])]
    items = [
        ("i0", {"v0": "present", "v1": "absent"}),
        ("i1", {"v0": "absent", "v1": "present"}),
    ]
    catalog = catalog_from_doc(make_doc(types, values, items))
    history = [
        _record(catalog, "first cue?", 1, VerdictKind.YES),   # keeps i0
        _record(catalog, "second cue?", 2, VerdictKind.YES),  # keeps i1: empty
    ]
    obs = observation(catalog, ["i0", "i1"], history)
    assert rebuild_mirror(obs).members == ()
    action = VerifierAgent().act(obs)
    assert action == AskValue("v0")  # oldest evidence first


def test_verifier_with_single_constraint_reasks_it() -> None:
    values = [("v0", "t0", "only", ["only?"])]
    items = [("i0", {"v0": "present"}), ("i1", {"v0": "present"})]
    catalog = catalog_from_doc(make_doc([("t0", "T0", False)], values, items))
    history = [_record(catalog, "only?", 1, VerdictKind.NO)]  # eliminates both
    obs = observation(catalog, ["i0", "i1"], history)
    assert rebuild_mirror(obs).members == ()
    assert VerifierAgent().act(obs) == AskValue("v0")


def test_valid_values_respects_enumeration(short_fixture) -> None:
    catalog = short_fixture["catalog"]
    history = [
        _record(catalog, "Does the dress have a tiered skirt?", 1, VerdictKind.YES)
    ]
    obs = observation(catalog, short_fixture["gallery"], history)
    allowed = valid_values(obs, contradiction_mode=False)
    assert "tiered_skirt" not in allowed
    assert "long_sleeves" not in allowed  # forbidden type
    assert "wrap_front" in allowed


def test_baseline_agents_never_skip_across_ten_thousand_episodes() -> None:
    # Zero skip rate across 10,000 seeded episodes, split over the three
    # baselines; the slower random policy gets a tighter budget.
    from amigo.rng import SplitMix64

    catalog = sparse_label_catalog()
    items = sorted(catalog.items)
    plan = [
        ("greedy", GreedySplitAgent, 4000, 20),
        ("verifier", VerifierAgent, 4000, 20),
        ("random", RandomValidAgent, 2000, 8),
    ]
    episodes = 0
    for name, cls, count, budget in plan:
        for seed in range(count):
            rng = SplitMix64(seed * 13 + 1)
            gallery = rng.sample(items, 6)
            episode = make_episode(gallery, rng.below(6) + 1, seed=seed)
            transcript = run_episode(
                catalog, episode, cls(seed=seed), RunConfig(budget=budget)
            )
            assert all(t.verdict != "skip" for t in transcript.turns), (name, seed)
            episodes += 1
    assert episodes == 10_000
