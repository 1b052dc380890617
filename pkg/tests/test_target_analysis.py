import pytest

from conftest import HUMAN_AI_PROBLEM, ScriptedGateway, make_snippet, mock_profiles

from idea_catalyst.config import Settings
from idea_catalyst.gateway import LLMGateway
from idea_catalyst.models import ContractError, CoverageAssessment, CoverageClass
from idea_catalyst.target_analysis import (
    assess_coverage,
    decompose_problem,
    exploration_order,
    extract_challenges,
    problem_key,
)

SETTINGS = Settings()


@pytest.fixture()
def mock_gateway():
    return LLMGateway(mock_profiles())


def test_decompose_human_ai_problem_surfaces_intent_adaptation_pair(mock_gateway):
    questions = decompose_problem(HUMAN_AI_PROBLEM, mock_gateway, SETTINGS)
    assert 3 <= len(questions) <= SETTINGS.max_questions
    intent = [q for q in questions if "infer and adapt to user intent" in q.domain_specific]
    assert intent, "expected a real-time intent/context adaptation question"
    assert "through continuous interaction" in intent[0].domain_agnostic


def test_decompose_human_ai_problem_surfaces_initiative_pair(mock_gateway):
    questions = decompose_problem(HUMAN_AI_PROBLEM, mock_gateway, SETTINGS)
    initiative = [q for q in questions if "take initiative" in q.domain_specific]
    assert initiative, "expected an initiative-versus-deference question"
    agnostic = initiative[0].domain_agnostic.lower()
    assert "control" in agnostic and ("exercised" in agnostic or "withheld" in agnostic)


def test_decompose_fixture_yields_wellformed_unique_ids(scripted_gateway):
    scripted_gateway.push(
        "decomposition",
        {
            "questions": [
                {"domain_specific": f"specific {i}", "domain_agnostic": f"agnostic {i}", "search_queries": ["q"]}
                for i in range(4)
            ]
        },
    )
    questions = decompose_problem(HUMAN_AI_PROBLEM, scripted_gateway, SETTINGS)
    assert len(questions) == 4
    assert len({q.id for q in questions}) == 4
    assert all(len(q.search_queries) >= 1 for q in questions)


def test_decompose_truncates_to_configured_max(scripted_gateway):
    scripted_gateway.push(
        "decomposition",
        {
            "questions": [
                {"domain_specific": f"s{i}", "domain_agnostic": f"a{i}", "search_queries": ["q1", "q2", "q3"]}
                for i in range(8)
            ]
        },
    )
    from dataclasses import replace

    questions = decompose_problem(HUMAN_AI_PROBLEM, scripted_gateway, replace(SETTINGS, max_questions=5, max_queries=2))
    assert len(questions) == 5
    assert all(len(q.search_queries) <= 2 for q in questions)


def test_question_ids_are_stable_across_runs(scripted_gateway):
    response = {
        "questions": [
            {"domain_specific": f"s{i}", "domain_agnostic": f"a{i}", "search_queries": ["q"]} for i in range(3)
        ]
    }
    scripted_gateway.push("decomposition", response, response)
    first = decompose_problem(HUMAN_AI_PROBLEM, scripted_gateway, SETTINGS)
    second = decompose_problem(HUMAN_AI_PROBLEM, scripted_gateway, SETTINGS)
    assert [q.id for q in first] == [q.id for q in second]
    assert problem_key(HUMAN_AI_PROBLEM) == problem_key(HUMAN_AI_PROBLEM)


# -- coverage -------------------------------------------------------------------


def question():
    from idea_catalyst.models import QuestionPair

    return QuestionPair(
        id="q1",
        domain_specific="How can systems adapt to user intent in real time?",
        domain_agnostic="How can understanding be updated through interaction?",
        search_queries=("intent adaptation",),
    )


def test_empty_evidence_forces_open_without_model_call(scripted_gateway):
    assessment = assess_coverage(question(), [], scripted_gateway, "HCI")
    assert assessment.klass is CoverageClass.OPEN
    assert "No target-domain evidence" in assessment.rationale
    assert scripted_gateway.calls == []


def test_zero_relevant_overrides_model_verdict(scripted_gateway):
    evidence = [make_snippet("p1"), make_snippet("p2")]
    scripted_gateway.push(
        "coverage",
        {
            "snippets": [{"paper_id": "p1", "relevant": False}, {"paper_id": "p2", "relevant": False}],
            "klass": "partial",
            "rationale": "The model is being optimistic.",
        },
    )
    assessment = assess_coverage(question(), evidence, scripted_gateway, "HCI")
    assert assessment.klass is CoverageClass.OPEN
    assert all(s.relevance is False for s in assessment.evidence)


def test_mixed_relevance_recorded_per_snippet(scripted_gateway):
    evidence = [make_snippet("p1"), make_snippet("p2"), make_snippet("p3")]
    scripted_gateway.push(
        "coverage",
        {
            "snippets": [
                {"paper_id": "p1", "relevant": True},
                {"paper_id": "p2", "relevant": False},
                {"paper_id": "p3", "relevant": True},
            ],
            "klass": "partial",
            "rationale": "Progress shown by [p1] but gaps remain.",
        },
    )
    assessment = assess_coverage(question(), evidence, scripted_gateway, "HCI")
    assert assessment.klass is CoverageClass.PARTIAL
    assert [s.relevance for s in assessment.evidence] == [True, False, True]
    assert "p1" in assessment.rationale


# -- challenges -----------------------------------------------------------------


def test_resolved_question_is_a_contract_error(scripted_gateway):
    assessment = CoverageAssessment(
        question_id="q1", klass=CoverageClass.RESOLVED, evidence=(), rationale="done"
    )
    with pytest.raises(ContractError):
        extract_challenges(question(), assessment, scripted_gateway, SETTINGS, "HCI")


def test_open_question_promotes_whole_as_self_challenge(scripted_gateway):
    assessment = CoverageAssessment(question_id="q1", klass=CoverageClass.OPEN, evidence=(), rationale="open")
    challenges = extract_challenges(question(), assessment, scripted_gateway, SETTINGS, "HCI")
    assert len(challenges) == 1
    ch = challenges[0]
    assert ch.domain_specific == question().domain_specific
    assert ch.domain_agnostic == question().domain_agnostic
    assert ch.priority_rank == 1
    assert scripted_gateway.calls == []


def test_partial_question_yields_ranked_challenges(scripted_gateway):
    assessment = CoverageAssessment(
        question_id="q1",
        klass=CoverageClass.PARTIAL,
        evidence=(make_snippet("p1", relevance=True),),
        rationale="partial, see [p1]",
    )
    scripted_gateway.push(
        "challenges",
        {
            "challenges": [
                {"domain_specific": "gap one", "domain_agnostic": "concept one"},
                {"domain_specific": "gap two", "domain_agnostic": "concept two"},
            ]
        },
    )
    challenges = extract_challenges(question(), assessment, scripted_gateway, SETTINGS, "HCI")
    assert [c.priority_rank for c in challenges] == [1, 2]
    assert all(c.parent_question_id == "q1" for c in challenges)


def test_partial_intent_question_yields_variability_challenge(mock_gateway):
    q = question()
    evidence = tuple(make_snippet(f"p{i}", relevance=True) for i in range(3))
    assessment = CoverageAssessment(
        question_id=q.id, klass=CoverageClass.PARTIAL, evidence=evidence, rationale="partial, see [p0]"
    )
    from idea_catalyst.models import QuestionPair

    intent_q = QuestionPair(
        id=q.id,
        domain_specific=(
            "How can collaborative AI systems dynamically infer and adapt to user intent and task "
            "context in real time?"
        ),
        domain_agnostic="How can understanding of a partner's intent and context be updated through continuous interaction?",
        search_queries=("intent",),
    )
    challenges = extract_challenges(intent_q, assessment, mock_gateway, SETTINGS, "HCI")
    variability = [c for c in challenges if "inter- and intra-user variability" in c.domain_specific]
    assert variability, "expected the user-variability challenge"
    assert "diverse collaborators" in variability[0].domain_agnostic


def test_exploration_order_puts_open_first():
    from idea_catalyst.models import Challenge

    assessments = {
        "q_open": CoverageAssessment(question_id="q_open", klass=CoverageClass.OPEN, evidence=(), rationale="x"),
        "q_partial": CoverageAssessment(
            question_id="q_partial", klass=CoverageClass.PARTIAL, evidence=(), rationale="x"
        ),
    }
    partial_1 = Challenge(id="c1", parent_question_id="q_partial", domain_specific="a", domain_agnostic="b", priority_rank=1)
    partial_2 = Challenge(id="c2", parent_question_id="q_partial", domain_specific="c", domain_agnostic="d", priority_rank=2)
    open_self = Challenge(id="c3", parent_question_id="q_open", domain_specific="e", domain_agnostic="f", priority_rank=1)
    ordered = exploration_order([partial_1, partial_2, open_self], assessments)
    assert [c.id for c in ordered] == ["c3", "c1", "c2"]
