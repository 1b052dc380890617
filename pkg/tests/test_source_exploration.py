import pytest
from hypothesis import given, strategies as st

from conftest import ScriptedGateway, make_snippet, mock_profiles

from idea_catalyst.config import Settings
from idea_catalyst.fields import CoarseField
from idea_catalyst.gateway import LLMGateway
from idea_catalyst.models import Challenge, GateResult, RationaleKind, SourceDomain
from idea_catalyst.source_exploration import (
    UNGROUNDED_REASON,
    assess_relevance,
    extract_takeaways,
    gate_domain,
    majority_keep,
    propose_source_domains,
)

SETTINGS = Settings()
CS = CoarseField.COMPUTER_SCIENCE

VARIABILITY = Challenge(
    id="ch1",
    parent_question_id="q1",
    domain_specific=(
        "How can a collaborative system adapt in real time to high inter- and intra-user "
        "variability in behavior and preferences?"
    ),
    domain_agnostic="How can behavior adapt to diverse collaborators and evolving goals and environments?",
    priority_rank=1,
)


def pending_domain(field=CoarseField.PSYCHOLOGY) -> SourceDomain:
    return SourceDomain(
        id="dom1",
        challenge_id="ch1",
        coarse_field=field,
        rationale="adaptation through feedback",
        rationale_kind=RationaleKind.SHARED_MECHANISM,
        search_queries=("metacontrol",),
    )


# -- majority gate ---------------------------------------------------------------


def test_gate_rule_examples():
    assert majority_keep(6, 10) is True
    assert majority_keep(5, 10) is False  # exactly half does not survive
    assert majority_keep(0, 0) is False


def test_gate_rule_exhaustive_up_to_40():
    for retrieved in range(0, 41):
        for relevant in range(0, retrieved + 1):
            expected = retrieved > 0 and relevant / retrieved > 0.5
            assert majority_keep(relevant, retrieved) == expected, (relevant, retrieved)


@given(st.integers(min_value=0, max_value=200))
def test_gate_monotone_in_relevant(retrieved):
    # adding a relevant paper never flips kept -> pruned
    for relevant in range(retrieved):
        if majority_keep(relevant, retrieved):
            assert majority_keep(relevant + 1, retrieved + 1)


@given(st.integers(min_value=0, max_value=200), st.integers(min_value=0, max_value=200))
def test_gate_irrelevant_additions_never_rescue(relevant, extra_irrelevant):
    retrieved = relevant + extra_irrelevant
    if not majority_keep(relevant, retrieved):
        assert not majority_keep(relevant, retrieved + 1)


# -- proposals --------------------------------------------------------------------


def test_candidates_never_include_target_coarse_field():
    gateway = LLMGateway(mock_profiles())
    domains = propose_source_domains(VARIABILITY, CS, gateway, SETTINGS)
    assert domains
    assert all(d.coarse_field is not CS for d in domains)
    assert all(d.challenge_id == VARIABILITY.id for d in domains)


def test_variability_challenge_attracts_psychology_with_feedback_rationale():
    gateway = LLMGateway(mock_profiles())
    domains = propose_source_domains(VARIABILITY, CS, gateway, SETTINGS)
    fields = {d.coarse_field for d in domains}
    assert CoarseField.PSYCHOLOGY in fields
    psych = next(d for d in domains if d.coarse_field is CoarseField.PSYCHOLOGY)
    assert "feedback" in psych.rationale.lower()
    assert any("cognitive load theory" in q for q in psych.search_queries)
    assert {CoarseField.SOCIOLOGY, CoarseField.ENGINEERING} <= fields


def test_invalid_and_target_candidates_are_dropped(scripted_gateway):
    scripted_gateway.push(
        "source_domains",
        {
            "candidates": [
                {"field": "Computer Science", "rationale": "too close", "rationale_kind": "analogy", "search_queries": ["x"]},
                {"field": "Alchemy", "rationale": "not a field", "rationale_kind": "analogy", "search_queries": ["x"]},
                {"field": "Psychology", "rationale": "feedback adaptation", "rationale_kind": "shared_mechanism", "search_queries": ["y"]},
            ]
        },
    )
    domains = propose_source_domains(VARIABILITY, CS, scripted_gateway, SETTINGS)
    assert [d.coarse_field for d in domains] == [CoarseField.PSYCHOLOGY]


def test_all_candidates_dropped_marks_unexplorable_after_one_retry(scripted_gateway):
    bad = {
        "candidates": [
            {"field": "Computer Science", "rationale": "r", "rationale_kind": "analogy", "search_queries": ["x"]},
            {"field": "Computer Science", "rationale": "r", "rationale_kind": "analogy", "search_queries": ["x"]},
        ]
    }
    scripted_gateway.push("source_domains", bad, bad)
    domains = propose_source_domains(VARIABILITY, CS, scripted_gateway, SETTINGS)
    assert domains == []
    assert len(scripted_gateway.calls) == 2


# -- relevance + gate ---------------------------------------------------------------


def test_assess_relevance_flags_every_paper(scripted_gateway):
    evidence = [make_snippet("p1"), make_snippet("p2")]
    scripted_gateway.push(
        "relevance",
        {"papers": [{"paper_id": "p1", "relevant": True}, {"paper_id": "p2", "relevant": False}]},
    )
    flagged = assess_relevance(pending_domain(), evidence, VARIABILITY, scripted_gateway)
    assert [s.relevance for s in flagged] == [True, False]


def test_assess_relevance_empty_evidence_skips_model(scripted_gateway):
    assert assess_relevance(pending_domain(), [], VARIABILITY, scripted_gateway) == ()
    assert scripted_gateway.calls == []


def test_gate_records_counts_and_result():
    flagged = [make_snippet(f"p{i}", relevance=(i < 6)) for i in range(10)]
    kept = gate_domain(pending_domain(), flagged)
    assert kept.gate_result is GateResult.KEPT
    assert (kept.relevant_count, kept.retrieved_count) == (6, 10)
    assert kept.prune_reason is None

    half = [make_snippet(f"p{i}", relevance=(i < 5)) for i in range(10)]
    pruned = gate_domain(pending_domain(), half)
    assert pruned.gate_result is GateResult.PRUNED
    assert pruned.prune_reason == "majority of retrieved papers irrelevant"

    empty = gate_domain(pending_domain(), [])
    assert empty.gate_result is GateResult.PRUNED
    assert empty.prune_reason == "no papers retrieved"


# -- takeaways ------------------------------------------------------------------------


def kept_domain(n_relevant=4):
    evidence = tuple(make_snippet(f"p{i}", relevance=True) for i in range(n_relevant))
    return gate_domain(pending_domain(), evidence), list(evidence)


def test_takeaways_are_grounded_in_relevant_evidence(scripted_gateway):
    domain, relevant = kept_domain()
    scripted_gateway.push(
        "takeaways",
        {
            "takeaways": [
                {"concept": "concept one", "mechanism": "how it works", "supporting_paper_ids": ["p0", "p2"]},
                {"concept": "concept two", "mechanism": "another mechanism", "supporting_paper_ids": ["p1"]},
            ]
        },
    )
    takeaways, updated = extract_takeaways(domain, VARIABILITY, relevant, scripted_gateway)
    assert len(takeaways) == 2
    assert updated.gate_result is GateResult.KEPT
    assert all(set(t.supporting_paper_ids) <= {"p0", "p1", "p2", "p3"} for t in takeaways)
    assert len({t.id for t in takeaways}) == 2


def test_ungrounded_takeaway_triggers_one_regeneration(scripted_gateway):
    domain, relevant = kept_domain()
    scripted_gateway.push(
        "takeaways",
        {"takeaways": [{"concept": "c", "mechanism": "m", "supporting_paper_ids": ["ghost-paper"]}]},
        {"takeaways": [{"concept": "c2", "mechanism": "m2", "supporting_paper_ids": ["p1"]}]},
    )
    takeaways, updated = extract_takeaways(domain, VARIABILITY, relevant, scripted_gateway)
    assert len(scripted_gateway.calls) == 2
    assert "previous attempt cited papers" in scripted_gateway.calls[1][2]["retry_note"]
    assert [t.concept for t in takeaways] == ["c2"]
    assert updated.gate_result is GateResult.KEPT


def test_all_takeaways_ungrounded_demotes_domain(scripted_gateway):
    domain, relevant = kept_domain()
    bad = {"takeaways": [{"concept": "c", "mechanism": "m", "supporting_paper_ids": ["ghost"]}]}
    scripted_gateway.push("takeaways", bad, bad)
    takeaways, updated = extract_takeaways(domain, VARIABILITY, relevant, scripted_gateway)
    assert takeaways == []
    assert updated.gate_result is GateResult.PRUNED
    assert updated.prune_reason == UNGROUNDED_REASON


def test_psychology_variability_takeaways_name_metacontrol_balance():
    gateway = LLMGateway(mock_profiles())
    domain, relevant = kept_domain()
    takeaways, _updated = extract_takeaways(domain, VARIABILITY, relevant, gateway)
    combined = " ".join(t.concept + " " + t.mechanism for t in takeaways)
    assert "persistence (maintaining current goals)" in combined
    assert "flexibility" in combined.lower()


def test_psychology_variability_takeaways_include_adaptive_support():
    gateway = LLMGateway(mock_profiles())
    domain, relevant = kept_domain()
    takeaways, _updated = extract_takeaways(domain, VARIABILITY, relevant, gateway)
    combined = " ".join(t.concept + " " + t.mechanism for t in takeaways).lower()
    assert "real-time monitoring and adaptive feedback" in combined
    supporting = {pid for t in takeaways for pid in t.supporting_paper_ids}
    assert supporting <= {s.paper_id for s in relevant}


def test_takeaways_require_kept_domain_and_relevant_evidence(scripted_gateway):
    domain, relevant = kept_domain()
    pruned = gate_domain(pending_domain(), [make_snippet("p0", relevance=False)])
    with pytest.raises(ValueError, match="kept"):
        extract_takeaways(pruned, VARIABILITY, relevant, scripted_gateway)
    with pytest.raises(ValueError, match="relevant"):
        extract_takeaways(domain, VARIABILITY, [make_snippet("x", relevance=False)], scripted_gateway)
