import itertools
import json
import random

import pytest

from conftest import ScriptedGateway, chat_transport, make_fragment, make_snippet, mock_profiles

from idea_catalyst.config import ProfileConfig, Settings
from idea_catalyst.fields import CoarseField
from idea_catalyst.gateway import LLMGateway
from idea_catalyst.integration import (
    compare_fragments,
    conceptual_rewrite,
    copeland_scores,
    generate_fragment,
    pair_key,
    proportion_rank,
    rank_fragments,
)
from idea_catalyst.models import (
    Challenge,
    ContractError,
    GateResult,
    PairwiseJudgment,
    RationaleKind,
    Resolved,
    ResearchProblem,
    SourceDomain,
    Takeaway,
    Verdict,
    validate_fragment,
)

SETTINGS = Settings()

PROBLEM = ResearchProblem(
    statement="Developing effective and reliable human-AI collaboration for open-ended, real-world tasks.",
    target_domain_fine="Human-Computer Interaction",
    target_domain_coarse=CoarseField.COMPUTER_SCIENCE,
    cutoff_year=2024,
)

CHALLENGE = Challenge(
    id="ch1",
    parent_question_id="q1",
    domain_specific="How can a system adapt in real time to high inter- and intra-user variability?",
    domain_agnostic="How can behavior adapt to diverse collaborators and evolving goals and environments?",
    priority_rank=1,
)


def takeaway(tid="t1", domain_id="dom1"):
    return Takeaway(
        id=tid,
        source_domain_id=domain_id,
        challenge_id="ch1",
        concept="Regulated balance between persistence and flexibility",
        mechanism="Explicit regulation keeps behavior focused yet adaptive.",
        supporting_paper_ids=("p1",),
    )


# -- fragment generation -----------------------------------------------------------


def test_generate_fragment_requires_takeaways():
    with pytest.raises(ContractError):
        generate_fragment(CHALLENGE, [], [], PROBLEM, ScriptedGateway(), SETTINGS)


def test_generate_fragment_rejects_mixed_domains():
    with pytest.raises(ContractError, match="one kept source domain"):
        generate_fragment(
            CHALLENGE, [], [takeaway("t1", "dom1"), takeaway("t2", "dom2")], PROBLEM, ScriptedGateway(), SETTINGS
        )


def test_generated_fragment_passes_validation_with_mock_model():
    gateway = LLMGateway(mock_profiles())
    evidence = [make_snippet("p1", relevance=True)]
    fragment = generate_fragment(
        CHALLENGE,
        evidence,
        [takeaway("t1"), takeaway("t2")],
        PROBLEM,
        gateway,
        SETTINGS,
        source_field_label="Psychology",
    )
    assert fragment is not None
    assert validate_fragment(fragment) == []
    assert set(fragment.takeaway_ids()) <= {"t1", "t2"}
    assert fragment.challenge_id == CHALLENGE.id
    assert fragment.source_domain_id == "dom1"


def fragment_tree(title="A valid integrated idea", takeaway_id="t1"):
    return {
        "title": title,
        "core_insight": "Couples the two literatures around one regulated loop.",
        "integration_mechanism": {
            "target_domain_elements": ["current modeling practice"],
            "selected_takeaways": [
                {
                    "takeaway_id": takeaway_id,
                    "source_domain_formulation": "a regulated balance",
                    "mechanism_explanation": "feedback regulation with explicit state",
                    "selection_rationale": "matches the conceptual gap",
                }
            ],
            "synthesis_approach": "wrap the base system in the regulation loop",
        },
        "challenge_resolution": {
            "addresses_target_challenge": "gives adaptation an explicit mechanism",
            "addresses_source_limitations": "operationalizes the construct",
            "addresses_research_problem": "directly advances the stated problem",
        },
        "concrete_realization": {
            "proposed_approach": "a two-level controller over existing components",
            "key_innovations": ["explicit regulation state", "meta-level adaptation"],
        },
    }


def test_overlong_title_triggers_repair_round():
    sixteen = " ".join(f"w{i}" for i in range(16))
    responses = [json.dumps(fragment_tree(title=sixteen)), json.dumps(fragment_tree())]
    gateway = LLMGateway(
        {
            "generator": ProfileConfig(name="generator", endpoint="http://llm.test", model_id="m", temperature=0.7),
            "judge": ProfileConfig(name="judge", endpoint="http://llm.test", model_id="j", temperature=0.0),
        },
        transport=chat_transport(responses),
        sleep=lambda _dt: None,
    )
    fragment = generate_fragment(CHALLENGE, [], [takeaway("t1")], PROBLEM, gateway, SETTINGS)
    assert fragment is not None
    assert validate_fragment(fragment) == []


def test_schema_failure_after_budget_skips_fragment():
    responses = ["nonsense"] * 3
    gateway = LLMGateway(
        {
            "generator": ProfileConfig(name="generator", endpoint="http://llm.test", model_id="m", temperature=0.7),
            "judge": ProfileConfig(name="judge", endpoint="http://llm.test", model_id="j", temperature=0.0),
        },
        transport=chat_transport(responses),
        sleep=lambda _dt: None,
    )
    assert generate_fragment(CHALLENGE, [], [takeaway("t1")], PROBLEM, gateway, SETTINGS) is None


# -- pairwise comparison -------------------------------------------------------------


def scripted_preference(winner_first: bool):
    return {"preferred_fragment": 1 if winner_first else 2, "rationale": "scripted"}


def test_identical_ids_rejected():
    f = make_fragment("f1")
    with pytest.raises(ContractError):
        compare_fragments(f, f, PROBLEM, ScriptedGateway())


def test_agreement_across_orderings_wins(scripted_gateway):
    a, b = make_fragment("fa"), make_fragment("fb")
    # first call: a presented first and preferred; second call: b presented first, a preferred
    scripted_gateway.push("comparison", scripted_preference(True), scripted_preference(False))
    judgment = compare_fragments(a, b, PROBLEM, scripted_gateway)
    assert judgment.resolved is Resolved.A_WINS
    assert judgment.verdict_ab is Verdict.A and judgment.verdict_ba is Verdict.A


def test_order_dependent_verdicts_resolve_to_tie(scripted_gateway):
    a, b = make_fragment("fa"), make_fragment("fb")
    scripted_gateway.push("comparison", scripted_preference(True), scripted_preference(True))
    judgment = compare_fragments(a, b, PROBLEM, scripted_gateway)
    assert judgment.resolved is Resolved.TIE


def test_judging_failure_resolves_to_tie_with_reason(scripted_gateway):
    from idea_catalyst.gateway import StructuredOutputError

    a, b = make_fragment("fa"), make_fragment("fb")
    scripted_gateway.push(
        "comparison", scripted_preference(True), StructuredOutputError("budget exhausted", last_raw="x")
    )
    judgment = compare_fragments(a, b, PROBLEM, scripted_gateway)
    assert judgment.resolved is Resolved.TIE
    assert "failed" in judgment.rationale


def test_cache_returns_mirrored_judgment(scripted_gateway):
    a, b = make_fragment("fa"), make_fragment("fb")
    scripted_gateway.push("comparison", scripted_preference(True), scripted_preference(False))
    cache = {}
    first = compare_fragments(a, b, PROBLEM, scripted_gateway, cache=cache)
    mirrored = compare_fragments(b, a, PROBLEM, scripted_gateway, cache=cache)
    assert mirrored is first
    assert len(scripted_gateway.calls) == 2  # no extra judge calls


def lexicographic_judge():
    """Deterministic judge preferring the lexicographically smaller core_insight."""

    def respond(bindings):
        core_1 = json.loads(bindings["fragment_1"])["core_insight"]
        core_2 = json.loads(bindings["fragment_2"])["core_insight"]
        return {"preferred_fragment": 1 if core_1 <= core_2 else 2, "rationale": "lexicographic"}

    gw = ScriptedGateway()
    for _ in range(1000):
        gw.queues["comparison"].append(respond)
    return gw


def test_mock_judge_matrix_is_reproducible_and_transitive():
    fragments = [make_fragment(f"f{i}", core=f"{chr(ord('a') + i)} core insight") for i in range(4)]
    gw = lexicographic_judge()
    judgments = [
        compare_fragments(a, b, PROBLEM, gw) for a, b in itertools.combinations(fragments, 2)
    ]
    ranked = rank_fragments(fragments, judgments)
    assert [f.id for f in ranked] == ["f0", "f1", "f2", "f3"]
    assert [f.copeland_score for f in ranked] == [3, 1, -1, -3]
    gw2 = lexicographic_judge()
    judgments2 = [
        compare_fragments(a, b, PROBLEM, gw2) for a, b in itertools.combinations(fragments, 2)
    ]
    assert judgments2 == judgments


# -- ranking ---------------------------------------------------------------------------


def judgment(a: str, b: str, outcome: str) -> PairwiseJudgment:
    if outcome == "a":
        return PairwiseJudgment(a, b, Verdict.A, Verdict.A, Resolved.A_WINS, "r")
    if outcome == "b":
        return PairwiseJudgment(a, b, Verdict.B, Verdict.B, Resolved.B_WINS, "r")
    return PairwiseJudgment(a, b, Verdict.A, Verdict.B, Resolved.TIE, "r")


def brute_force_rank(ids, outcomes):
    """Independent tournament oracle over outcome maps keyed by (a, b) with a < b."""
    score = {fid: 0 for fid in ids}
    for (a, b), outcome in outcomes.items():
        if outcome == "a":
            score[a] += 1
            score[b] -= 1
        elif outcome == "b":
            score[b] += 1
            score[a] -= 1
    return sorted(ids, key=lambda fid: (-score[fid], fid)), score


def test_single_fragment_ranks_first_with_zero_score():
    ranked = rank_fragments([make_fragment("only")], [])
    assert ranked[0].final_rank == 1
    assert ranked[0].copeland_score == 0


def test_three_cycle_scores_zero_and_orders_by_id():
    fragments = [make_fragment(f) for f in ("fa", "fb", "fc")]
    judgments = [judgment("fa", "fb", "a"), judgment("fb", "fc", "a"), judgment("fa", "fc", "b")]
    ranked = rank_fragments(fragments, judgments)
    assert [f.copeland_score for f in ranked] == [0, 0, 0]
    assert [f.id for f in ranked] == ["fa", "fb", "fc"]
    assert [f.final_rank for f in ranked] == [1, 2, 3]


def test_transitive_preferences_match_transitive_order():
    ids = [f"f{i}" for i in range(4)]
    fragments = [make_fragment(fid) for fid in ids]
    outcomes = {}
    for a, b in itertools.combinations(ids, 2):
        outcomes[(a, b)] = "a"  # f0 beats all, f1 beats f2, f3 ...
    judgments = [judgment(a, b, res) for (a, b), res in outcomes.items()]
    ranked = rank_fragments(fragments, judgments)
    oracle_order, oracle_scores = brute_force_rank(ids, outcomes)
    assert [f.id for f in ranked] == oracle_order == ids
    assert [f.copeland_score for f in ranked] == [oracle_scores[f] for f in oracle_order]


def test_missing_pair_is_contract_error_naming_pair():
    fragments = [make_fragment(f) for f in ("fa", "fb", "fc")]
    judgments = [judgment("fa", "fb", "a")]
    with pytest.raises(ContractError, match="missing pairwise judgment"):
        rank_fragments(fragments, judgments)


def test_duplicate_pair_is_contract_error():
    fragments = [make_fragment(f) for f in ("fa", "fb")]
    judgments = [judgment("fa", "fb", "a"), judgment("fa", "fb", "b")]
    with pytest.raises(ContractError, match="more than once"):
        rank_fragments(fragments, judgments)


def test_ranking_is_a_permutation_of_input():
    rng = random.Random(7)
    ids = [f"f{i}" for i in range(6)]
    fragments = [make_fragment(fid) for fid in ids]
    judgments = [
        judgment(a, b, rng.choice(["a", "b", "tie"])) for a, b in itertools.combinations(ids, 2)
    ]
    ranked = rank_fragments(fragments, judgments)
    assert sorted(f.id for f in ranked) == sorted(ids)
    assert sorted(f.final_rank for f in ranked) == list(range(1, 7))


# -- proportion ranking -------------------------------------------------------------


def domain_with_fraction(did, relevant, retrieved):
    return SourceDomain(
        id=did,
        challenge_id="ch1",
        coarse_field=CoarseField.PSYCHOLOGY,
        rationale="r",
        rationale_kind=RationaleKind.ANALOGY,
        search_queries=("q",),
        gate_result=GateResult.KEPT,
        relevant_count=relevant,
        retrieved_count=retrieved,
        evidence=tuple(make_snippet(f"{did}_p{i}", relevance=(i < relevant)) for i in range(retrieved)),
    )


def test_proportion_rank_orders_by_fraction_then_id():
    domains = {
        "d9": domain_with_fraction("d9", 9, 10),
        "d6a": domain_with_fraction("d6a", 6, 10),
        "d6b": domain_with_fraction("d6b", 6, 10),
    }
    fragments = [
        make_fragment("fb", source_domain_id="d6b"),
        make_fragment("fa", source_domain_id="d6a"),
        make_fragment("fz", source_domain_id="d9"),
    ]
    ranked = proportion_rank(fragments, domains)
    assert [f.id for f in ranked] == ["fz", "fa", "fb"]
    assert [f.final_rank for f in ranked] == [1, 2, 3]
    assert all(f.copeland_score is None for f in ranked)


def test_proportion_rank_single_fragment():
    domains = {"d": domain_with_fraction("d", 3, 4)}
    ranked = proportion_rank([make_fragment("f", source_domain_id="d")], domains)
    assert ranked[0].final_rank == 1


def test_proportion_rank_matches_sort_oracle_on_random_fractions():
    rng = random.Random(13)
    domains = {}
    fragments = []
    for i in range(30):
        retrieved = rng.randint(1, 20)
        relevant = rng.randint((retrieved // 2) + 1, retrieved)
        did = f"d{i}"
        domains[did] = domain_with_fraction(did, relevant, retrieved)
        fragments.append(make_fragment(f"f{i:02d}", source_domain_id=did))
    ranked = proportion_rank(fragments, domains)
    oracle = sorted(
        fragments,
        key=lambda f: (-(domains[f.source_domain_id].relevant_count / domains[f.source_domain_id].retrieved_count), f.id),
    )
    assert [f.id for f in ranked] == [f.id for f in oracle]


# -- conceptual rewriting -------------------------------------------------------------


def test_mock_rewrite_preserves_takeaway_ids_and_structure():
    gateway = LLMGateway(mock_profiles())
    fragment = make_fragment("f1", takeaway_ids=("t1", "t2"), core="Core insight.   With   extra   spaces.")
    rewritten = conceptual_rewrite(fragment, gateway)
    assert rewritten.id == fragment.id
    assert rewritten.takeaway_ids() == fragment.takeaway_ids()
    assert len(rewritten.concrete_realization.key_innovations) == len(
        fragment.concrete_realization.key_innovations
    )
    assert rewritten.core_insight != fragment.core_insight
    assert validate_fragment(rewritten) == []


def test_rewrite_dropping_key_innovation_is_rejected(scripted_gateway):
    fragment = make_fragment("f1")
    tree = fragment_tree()
    tree["concrete_realization"]["key_innovations"] = ["only one left"]
    scripted_gateway.push("fragment", tree)
    assert conceptual_rewrite(fragment, scripted_gateway) is fragment


def test_rewrite_changing_takeaway_ids_is_rejected(scripted_gateway):
    fragment = make_fragment("f1", takeaway_ids=("t1",))
    scripted_gateway.push("fragment", fragment_tree(takeaway_id="t9"))
    assert conceptual_rewrite(fragment, scripted_gateway) is fragment


def test_rewrite_of_minimal_fragment_is_accepted(scripted_gateway):
    fragment = make_fragment("f1", takeaway_ids=("t1",), title="Minimal idea")
    tree = fragment_tree(title="Minimal idea")
    tree["concrete_realization"]["key_innovations"] = ["explicit regulation state", "meta-level adaptation"]
    scripted_gateway.push("fragment", tree)
    rewritten = conceptual_rewrite(fragment, scripted_gateway)
    assert rewritten.id == fragment.id
    assert rewritten.takeaway_ids() == ("t1",)


def test_pair_key_is_unordered():
    assert pair_key("a", "b") == pair_key("b", "a") == ("a", "b")


def test_copeland_scores_exact_counts():
    ids = ["x", "y", "z"]
    judgments = [judgment("x", "y", "a"), judgment("x", "z", "a"), judgment("y", "z", "tie")]
    assert copeland_scores(ids, judgments) == {"x": 2, "y": -1, "z": -1}
