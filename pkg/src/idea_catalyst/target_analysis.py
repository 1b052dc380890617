"""Critical-reasoning stage: decomposition, coverage classification, challenge extraction."""

from __future__ import annotations

import hashlib
import logging
from typing import Sequence

from .config import Settings
from .models import (
    Challenge,
    ContractError,
    CoverageAssessment,
    CoverageClass,
    PaperSnippet,
    QuestionPair,
    ResearchProblem,
    make_id,
)
from .textblocks import render_evidence_block

logger = logging.getLogger(__name__)

_NO_EVIDENCE_RATIONALE = (
    "No target-domain evidence was retrieved for this question; treating it as unexplored."
)


def problem_key(problem: ResearchProblem) -> str:
    raw = f"{problem.statement}|{problem.target_domain_fine}|{problem.target_domain_coarse.value}|{problem.cutoff_year}"
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]


def decompose_problem(problem: ResearchProblem, gateway, settings: Settings) -> list[QuestionPair]:
    """Split the problem into 3..max_questions dual-representation questions."""
    parsed = gateway.call(
        "generator",
        "decompose",
        {
            "statement": problem.statement,
            "target_domain_fine": problem.target_domain_fine,
            "target_domain_coarse": problem.target_domain_coarse.value,
            "min_questions": settings.min_questions,
            "max_questions": settings.max_questions,
            "max_queries": settings.max_queries,
        },
        "decomposition",
    )
    key = problem_key(problem)
    questions = []
    for i, q in enumerate(parsed["questions"][: settings.max_questions]):
        questions.append(
            QuestionPair(
                id=make_id("question", key, i),
                domain_specific=q["domain_specific"].strip(),
                domain_agnostic=q["domain_agnostic"].strip(),
                search_queries=tuple(s.strip() for s in q["search_queries"][: settings.max_queries]),
            )
        )
    return questions


def assess_coverage(
    question: QuestionPair,
    evidence: Sequence[PaperSnippet],
    gateway,
    target_domain_fine: str,
) -> CoverageAssessment:
    """Classify coverage and flag per-snippet relevance in one structured call.

    Zero relevant snippets force klass=open regardless of the model verdict.
    """
    if not evidence:
        return CoverageAssessment(
            question_id=question.id,
            klass=CoverageClass.OPEN,
            evidence=(),
            rationale=_NO_EVIDENCE_RATIONALE,
        )
    parsed = gateway.call(
        "generator",
        "coverage",
        {
            "domain_specific": question.domain_specific,
            "domain_agnostic": question.domain_agnostic,
            "target_domain_fine": target_domain_fine,
            "evidence_block": render_evidence_block(evidence),
        },
        "coverage",
        context={"paper_ids": [s.paper_id for s in evidence]},
    )
    flags = {entry["paper_id"]: entry["relevant"] for entry in parsed["snippets"]}
    flagged = tuple(s.with_relevance(flags[s.paper_id]) for s in evidence)
    klass = CoverageClass(parsed["klass"])
    if not any(flags.values()):
        klass = CoverageClass.OPEN
    return CoverageAssessment(
        question_id=question.id,
        klass=klass,
        evidence=flagged,
        rationale=parsed["rationale"].strip(),
    )


def extract_challenges(
    question: QuestionPair,
    assessment: CoverageAssessment,
    gateway,
    settings: Settings,
    target_domain_fine: str,
) -> list[Challenge]:
    """Open questions promote whole (one self-challenge); partial ones yield 1..max."""
    if assessment.klass is CoverageClass.RESOLVED:
        raise ContractError(f"question {question.id} is resolved; no challenges to extract")
    if assessment.klass is CoverageClass.OPEN:
        return [
            Challenge(
                id=make_id("challenge", question.id, 0),
                parent_question_id=question.id,
                domain_specific=question.domain_specific,
                domain_agnostic=question.domain_agnostic,
                priority_rank=1,
            )
        ]
    relevant = [s for s in assessment.evidence if s.relevance]
    parsed = gateway.call(
        "generator",
        "challenges",
        {
            "domain_specific": question.domain_specific,
            "domain_agnostic": question.domain_agnostic,
            "rationale": assessment.rationale,
            "evidence_block": render_evidence_block(relevant),
            "max_challenges": settings.max_challenges,
            "target_domain_fine": target_domain_fine,
        },
        "challenges",
    )
    challenges = []
    for i, ch in enumerate(parsed["challenges"][: settings.max_challenges]):
        challenges.append(
            Challenge(
                id=make_id("challenge", question.id, i),
                parent_question_id=question.id,
                domain_specific=ch["domain_specific"].strip(),
                domain_agnostic=ch["domain_agnostic"].strip(),
                priority_rank=i + 1,
            )
        )
    return challenges


def exploration_order(
    challenges: Sequence[Challenge],
    assessments_by_question: dict[str, CoverageAssessment],
) -> list[Challenge]:
    """Exploration set ordering: open-question self-challenges first, then by priority."""

    def key(pair):
        index, ch = pair
        if ch.parent_question_id is None:
            klass = CoverageClass.OPEN
        else:
            klass = assessments_by_question[ch.parent_question_id].klass
        return (0 if klass is CoverageClass.OPEN else 1, index)

    return [ch for _i, ch in sorted(enumerate(challenges), key=key)]
