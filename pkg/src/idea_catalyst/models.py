"""Domain types, fragment schema validation, and canonical run-artifact serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional

from .fields import CoarseField

SCHEMA_VERSION = "1"

# Canonical pipeline stage order; artifacts may checkpoint a subset of these
# (strategies skip stages) but never out of order.
STAGES = (
    "decomposition",
    "coverage",
    "challenges",
    "source_domains",
    "takeaways",
    "fragments",
    "ranking",
    "rewrite",
)

MAX_TITLE_WORDS = 15


class ContractError(Exception):
    """An operation was invoked outside its contract."""


class IntegrityError(Exception):
    """A run artifact failed referential-integrity checks."""


def make_id(stage: str, parent: str, ordinal: int) -> str:
    """Deterministic 12-hex-char id from (stage, parent id, ordinal).

    Stable across resumes: re-running a stage over the same inputs reproduces
    the same ids.
    """
    digest = hashlib.sha256(f"{stage}:{parent}:{ordinal}".encode("utf-8")).hexdigest()
    return digest[:12]


def word_count(text: str) -> int:
    return len(text.split())


class SourceKind(str, Enum):
    SNIPPET = "snippet"
    ABSTRACT_FALLBACK = "abstract_fallback"


class CoverageClass(str, Enum):
    RESOLVED = "resolved"
    PARTIAL = "partial"
    OPEN = "open"


class GateResult(str, Enum):
    PENDING = "pending"
    KEPT = "kept"
    PRUNED = "pruned"


class RationaleKind(str, Enum):
    ANALOGY = "analogy"
    SHARED_MECHANISM = "shared_mechanism"
    TRANSFERABLE_PRINCIPLE = "transferable_principle"


@dataclass(frozen=True)
class ResearchProblem:
    """A short problem statement situated in a target domain."""

    statement: str
    target_domain_fine: str
    target_domain_coarse: CoarseField
    cutoff_year: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.statement.strip():
            raise ValueError("problem statement must be non-empty")
        if not isinstance(self.target_domain_coarse, CoarseField):
            raise ValueError("target_domain_coarse must be a CoarseField")
        if self.cutoff_year is not None and self.cutoff_year < 1900:
            raise ValueError("cutoff_year must be >= 1900")


@dataclass(frozen=True)
class QuestionPair:
    """A research question in dual form: domain-specific and domain-agnostic."""

    id: str
    domain_specific: str
    domain_agnostic: str
    search_queries: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.domain_specific.strip() or not self.domain_agnostic.strip():
            raise ValueError("question texts must be non-empty")
        if self.domain_specific == self.domain_agnostic:
            raise ValueError("dual question texts must be distinct")
        if not self.search_queries:
            raise ValueError("at least one search query required")


@dataclass(frozen=True)
class PaperSnippet:
    """A retrieved literature passage with provenance metadata."""

    paper_id: str
    title: str
    year: Optional[int]
    snippet_text: str
    source_kind: SourceKind
    query: str
    domain: CoarseField
    relevance: Optional[bool] = None

    def __post_init__(self) -> None:
        if not self.snippet_text.strip():
            raise ValueError("snippet_text must be non-empty")
        if self.source_kind is SourceKind.ABSTRACT_FALLBACK and self.snippet_text == self.title:
            raise ValueError("abstract fallback text must differ from the title")

    def with_relevance(self, flag: bool) -> "PaperSnippet":
        return replace(self, relevance=flag)


@dataclass(frozen=True)
class CoverageAssessment:
    """Literature-coverage verdict for one question, with flagged evidence."""

    question_id: str
    klass: CoverageClass
    evidence: tuple[PaperSnippet, ...]
    rationale: str

    def __post_init__(self) -> None:
        if not self.rationale.strip():
            raise ValueError("rationale must be non-empty")


@dataclass(frozen=True)
class Challenge:
    """An unresolved gap, in dual representation, linked to its parent question.

    parent_question_id is None for strategies that skip question decomposition;
    open questions are promoted whole as self-challenges whose texts equal the
    parent's.
    """

    id: str
    parent_question_id: Optional[str]
    domain_specific: str
    domain_agnostic: str
    priority_rank: int

    def __post_init__(self) -> None:
        if not self.domain_specific.strip() or not self.domain_agnostic.strip():
            raise ValueError("challenge texts must be non-empty")
        if self.priority_rank < 1:
            raise ValueError("priority_rank is 1-based")


@dataclass(frozen=True)
class SourceDomain:
    """A candidate source field explored for one challenge, with gate outcome."""

    id: str
    challenge_id: str
    coarse_field: CoarseField
    rationale: str
    rationale_kind: RationaleKind
    search_queries: tuple[str, ...]
    gate_result: GateResult = GateResult.PENDING
    relevant_count: int = 0
    retrieved_count: int = 0
    evidence: tuple[PaperSnippet, ...] = ()
    prune_reason: Optional[str] = None

    def __post_init__(self) -> None:
        if self.relevant_count < 0 or self.retrieved_count < 0:
            raise ValueError("counts must be non-negative")
        if self.relevant_count > self.retrieved_count:
            raise ValueError("relevant_count cannot exceed retrieved_count")
        if self.gate_result is GateResult.KEPT:
            if self.retrieved_count == 0 or self.relevant_count * 2 <= self.retrieved_count:
                raise ValueError("kept domains require strict-majority relevant evidence")


@dataclass(frozen=True)
class Takeaway:
    """A literature-grounded concept and mechanism mined from a source domain."""

    id: str
    source_domain_id: str
    challenge_id: str
    concept: str
    mechanism: str
    supporting_paper_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.concept.strip() or not self.mechanism.strip():
            raise ValueError("concept and mechanism must be non-empty")
        if not self.supporting_paper_ids:
            raise ValueError("a takeaway must cite at least one paper")


@dataclass(frozen=True)
class SelectedTakeaway:
    takeaway_id: str
    source_domain_formulation: str
    mechanism_explanation: str
    selection_rationale: str


@dataclass(frozen=True)
class IntegrationMechanism:
    target_domain_elements: tuple[str, ...]
    selected_takeaways: tuple[SelectedTakeaway, ...]
    synthesis_approach: str


@dataclass(frozen=True)
class ChallengeResolution:
    addresses_target_challenge: str
    addresses_source_limitations: str
    addresses_research_problem: str


@dataclass(frozen=True)
class ConcreteRealization:
    proposed_approach: str
    key_innovations: tuple[str, ...]


@dataclass(frozen=True)
class IdeaFragment:
    """An integrated cross-domain idea. Deliberately not validated at
    construction: validate_fragment reports violations as data."""

    id: str
    title: str
    core_insight: str
    integration_mechanism: IntegrationMechanism
    challenge_resolution: ChallengeResolution
    concrete_realization: ConcreteRealization
    source_domain_id: str
    challenge_id: str
    copeland_score: Optional[int] = None
    final_rank: Optional[int] = None
    provenance: str = "method"

    def takeaway_ids(self) -> tuple[str, ...]:
        return tuple(t.takeaway_id for t in self.integration_mechanism.selected_takeaways)


class Verdict(str, Enum):
    A = "a"
    B = "b"


class Resolved(str, Enum):
    A_WINS = "a_wins"
    B_WINS = "b_wins"
    TIE = "tie"


@dataclass(frozen=True)
class PairwiseJudgment:
    """Double-ordered pairwise preference between two fragments.

    verdict_ab is the winner when a is presented first; verdict_ba when b is.
    The pair resolves to a win only when both orderings agree.
    """

    fragment_a: str
    fragment_b: str
    verdict_ab: Optional[Verdict]
    verdict_ba: Optional[Verdict]
    resolved: Resolved
    rationale: str

    def __post_init__(self) -> None:
        agree_a = self.verdict_ab is Verdict.A and self.verdict_ba is Verdict.A
        agree_b = self.verdict_ab is Verdict.B and self.verdict_ba is Verdict.B
        expected = Resolved.A_WINS if agree_a else Resolved.B_WINS if agree_b else Resolved.TIE
        if self.resolved is not expected:
            raise ValueError("resolved verdict inconsistent with the two orderings")


@dataclass(frozen=True)
class RunArtifact:
    """Complete, serializable record of one pipeline execution."""

    problem: ResearchProblem
    questions: tuple[QuestionPair, ...] = ()
    assessments: tuple[CoverageAssessment, ...] = ()
    challenges: tuple[Challenge, ...] = ()
    source_domains: tuple[SourceDomain, ...] = ()
    takeaways: tuple[Takeaway, ...] = ()
    fragments: tuple[IdeaFragment, ...] = ()
    judgments: tuple[PairwiseJudgment, ...] = ()
    stage_checkpoints: tuple[tuple[str, str], ...] = ()
    config_snapshot: Mapping[str, Any] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def checkpoint_map(self) -> dict[str, str]:
        return dict(self.stage_checkpoints)

    def with_checkpoint(self, stage: str, timestamp: str) -> "RunArtifact":
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        if stage in self.checkpoint_map():
            raise ValueError(f"stage {stage!r} already checkpointed")
        return replace(self, stage_checkpoints=self.stage_checkpoints + ((stage, timestamp),))

    def question_by_id(self) -> dict[str, QuestionPair]:
        return {q.id: q for q in self.questions}

    def assessment_by_question(self) -> dict[str, CoverageAssessment]:
        return {a.question_id: a for a in self.assessments}

    def domain_by_id(self) -> dict[str, SourceDomain]:
        return {d.id: d for d in self.source_domains}

    def takeaway_by_id(self) -> dict[str, Takeaway]:
        return {t.id: t for t in self.takeaways}


# ---------------------------------------------------------------------------
# Fragment validation


def validate_fragment(fragment: IdeaFragment, run: Optional[RunArtifact] = None) -> list[str]:
    """Return every schema violation for a fragment; empty list means valid.

    Total: never raises on bad data. When run is given, reference fields are
    also checked against it; ground-truth fragments are validated standalone.
    """
    violations: list[str] = []
    if not fragment.id:
        violations.append("missing field: id")
    if not fragment.title.strip():
        violations.append("missing field: title")
    elif word_count(fragment.title) > MAX_TITLE_WORDS:
        violations.append(f"title exceeds {MAX_TITLE_WORDS} words")
    if not fragment.core_insight.strip():
        violations.append("missing field: core_insight")

    mech = fragment.integration_mechanism
    if not mech.target_domain_elements:
        violations.append("missing field: integration_mechanism.target_domain_elements")
    if not mech.selected_takeaways:
        violations.append("missing field: integration_mechanism.selected_takeaways")
    for i, sel in enumerate(mech.selected_takeaways):
        for name in ("takeaway_id", "source_domain_formulation", "mechanism_explanation", "selection_rationale"):
            if not getattr(sel, name).strip():
                violations.append(f"missing field: selected_takeaways[{i}].{name}")
    if not mech.synthesis_approach.strip():
        violations.append("missing field: integration_mechanism.synthesis_approach")

    res = fragment.challenge_resolution
    for name in ("addresses_target_challenge", "addresses_source_limitations", "addresses_research_problem"):
        if not getattr(res, name).strip():
            violations.append(f"missing field: challenge_resolution.{name}")

    real = fragment.concrete_realization
    if not real.proposed_approach.strip():
        violations.append("missing field: concrete_realization.proposed_approach")
    if not real.key_innovations:
        violations.append("missing field: concrete_realization.key_innovations")

    if run is not None:
        known_takeaways = run.takeaway_by_id()
        for sel in mech.selected_takeaways:
            if sel.takeaway_id and sel.takeaway_id not in known_takeaways:
                violations.append(f"dangling takeaway reference: {sel.takeaway_id}")
        if fragment.challenge_id and fragment.challenge_id not in {c.id for c in run.challenges}:
            violations.append(f"dangling challenge reference: {fragment.challenge_id}")
        if fragment.source_domain_id and fragment.source_domain_id not in run.domain_by_id():
            violations.append(f"dangling source domain reference: {fragment.source_domain_id}")
    return violations


# ---------------------------------------------------------------------------
# Referential integrity


def check_integrity(artifact: RunArtifact) -> list[str]:
    """Return all referential-integrity violations in an artifact."""
    problems: list[str] = []
    questions = artifact.question_by_id()
    assessments = artifact.assessment_by_question()
    challenge_ids = {c.id for c in artifact.challenges}
    domains = artifact.domain_by_id()
    takeaways = artifact.takeaway_by_id()
    # Distance is relaxed only for the unconstrained-retrieval baseline.
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    enforce_distance = strategy != "free_form_source"

    seen_q: set[str] = set()
    for q in artifact.questions:
        if q.id in seen_q:
            problems.append(f"duplicate question id: {q.id}")
        seen_q.add(q.id)
    for a in artifact.assessments:
        if a.question_id not in questions:
            problems.append(f"assessment references unknown question: {a.question_id}")
    assessed = [a.question_id for a in artifact.assessments]
    for qid, count in {qid: assessed.count(qid) for qid in assessed}.items():
        if count > 1:
            problems.append(f"question assessed more than once: {qid}")
    for c in artifact.challenges:
        if c.parent_question_id is not None:
            if c.parent_question_id not in questions:
                problems.append(f"challenge {c.id} references unknown question: {c.parent_question_id}")
            else:
                parent = assessments.get(c.parent_question_id)
                if parent is not None and parent.klass is CoverageClass.RESOLVED:
                    problems.append(f"challenge {c.id} derived from a resolved question")
    for d in artifact.source_domains:
        if d.challenge_id not in challenge_ids:
            problems.append(f"source domain {d.id} references unknown challenge: {d.challenge_id}")
        if enforce_distance and d.coarse_field is artifact.problem.target_domain_coarse:
            problems.append(f"source domain {d.id} equals the target coarse field")
    for t in artifact.takeaways:
        domain = domains.get(t.source_domain_id)
        if domain is None:
            problems.append(f"takeaway {t.id} references unknown source domain: {t.source_domain_id}")
            continue
        if t.challenge_id not in challenge_ids:
            problems.append(f"takeaway {t.id} references unknown challenge: {t.challenge_id}")
        relevant_papers = {s.paper_id for s in domain.evidence if s.relevance is True}
        for pid in t.supporting_paper_ids:
            if pid not in relevant_papers:
                problems.append(f"takeaway {t.id} cites paper outside relevant evidence: {pid}")
    for f in artifact.fragments:
        if f.provenance != "method":
            continue
        problems.extend(validate_fragment(f, artifact))
    fragment_ids = {f.id for f in artifact.fragments}
    for j in artifact.judgments:
        for ref in (j.fragment_a, j.fragment_b):
            if ref not in fragment_ids:
                problems.append(f"judgment references unknown fragment: {ref}")
    cutoff = artifact.problem.cutoff_year
    if cutoff is not None:
        for snip in iter_snippets(artifact):
            if snip.year is None or snip.year >= cutoff:
                problems.append(f"snippet violates year cutoff: {snip.paper_id} (year {snip.year})")
    order = {name: i for i, name in enumerate(STAGES)}
    indices = []
    for stage, _ts in artifact.stage_checkpoints:
        if stage not in order:
            problems.append(f"unknown checkpoint stage: {stage}")
        else:
            indices.append(order[stage])
    if indices != sorted(indices):
        problems.append("stage checkpoints out of pipeline order")
    return problems


def iter_snippets(artifact: RunArtifact):
    for a in artifact.assessments:
        yield from a.evidence
    for d in artifact.source_domains:
        yield from d.evidence


# ---------------------------------------------------------------------------
# Canonical serialization


def _snippet_dict(s: PaperSnippet) -> dict[str, Any]:
    return {
        "paper_id": s.paper_id,
        "title": s.title,
        "year": s.year,
        "snippet_text": s.snippet_text,
        "source_kind": s.source_kind.value,
        "query": s.query,
        "domain": s.domain.value,
        "relevance": s.relevance,
    }


def _snippet_from(d: Mapping[str, Any]) -> PaperSnippet:
    return PaperSnippet(
        paper_id=d["paper_id"],
        title=d["title"],
        year=d["year"],
        snippet_text=d["snippet_text"],
        source_kind=SourceKind(d["source_kind"]),
        query=d["query"],
        domain=CoarseField(d["domain"]),
        relevance=d["relevance"],
    )


def fragment_to_dict(f: IdeaFragment) -> dict[str, Any]:
    return {
        "id": f.id,
        "title": f.title,
        "core_insight": f.core_insight,
        "integration_mechanism": {
            "target_domain_elements": list(f.integration_mechanism.target_domain_elements),
            "selected_takeaways": [
                {
                    "takeaway_id": sel.takeaway_id,
                    "source_domain_formulation": sel.source_domain_formulation,
                    "mechanism_explanation": sel.mechanism_explanation,
                    "selection_rationale": sel.selection_rationale,
                }
                for sel in f.integration_mechanism.selected_takeaways
            ],
            "synthesis_approach": f.integration_mechanism.synthesis_approach,
        },
        "challenge_resolution": {
            "addresses_target_challenge": f.challenge_resolution.addresses_target_challenge,
            "addresses_source_limitations": f.challenge_resolution.addresses_source_limitations,
            "addresses_research_problem": f.challenge_resolution.addresses_research_problem,
        },
        "concrete_realization": {
            "proposed_approach": f.concrete_realization.proposed_approach,
            "key_innovations": list(f.concrete_realization.key_innovations),
        },
        "source_domain_id": f.source_domain_id,
        "challenge_id": f.challenge_id,
        "copeland_score": f.copeland_score,
        "final_rank": f.final_rank,
        "provenance": f.provenance,
    }


def fragment_from_dict(d: Mapping[str, Any]) -> IdeaFragment:
    mech = d["integration_mechanism"]
    res = d["challenge_resolution"]
    real = d["concrete_realization"]
    return IdeaFragment(
        id=d["id"],
        title=d["title"],
        core_insight=d["core_insight"],
        integration_mechanism=IntegrationMechanism(
            target_domain_elements=tuple(mech["target_domain_elements"]),
            selected_takeaways=tuple(
                SelectedTakeaway(
                    takeaway_id=sel["takeaway_id"],
                    source_domain_formulation=sel["source_domain_formulation"],
                    mechanism_explanation=sel["mechanism_explanation"],
                    selection_rationale=sel["selection_rationale"],
                )
                for sel in mech["selected_takeaways"]
            ),
            synthesis_approach=mech["synthesis_approach"],
        ),
        challenge_resolution=ChallengeResolution(
            addresses_target_challenge=res["addresses_target_challenge"],
            addresses_source_limitations=res["addresses_source_limitations"],
            addresses_research_problem=res["addresses_research_problem"],
        ),
        concrete_realization=ConcreteRealization(
            proposed_approach=real["proposed_approach"],
            key_innovations=tuple(real["key_innovations"]),
        ),
        source_domain_id=d["source_domain_id"],
        challenge_id=d["challenge_id"],
        copeland_score=d["copeland_score"],
        final_rank=d["final_rank"],
        provenance=d.get("provenance", "method"),
    )


def artifact_to_dict(artifact: RunArtifact) -> dict[str, Any]:
    p = artifact.problem
    return {
        "schema_version": artifact.schema_version,
        "problem": {
            "statement": p.statement,
            "target_domain_fine": p.target_domain_fine,
            "target_domain_coarse": p.target_domain_coarse.value,
            "cutoff_year": p.cutoff_year,
        },
        "questions": [
            {
                "id": q.id,
                "domain_specific": q.domain_specific,
                "domain_agnostic": q.domain_agnostic,
                "search_queries": list(q.search_queries),
            }
            for q in artifact.questions
        ],
        "assessments": [
            {
                "question_id": a.question_id,
                "klass": a.klass.value,
                "evidence": [_snippet_dict(s) for s in a.evidence],
                "rationale": a.rationale,
            }
            for a in artifact.assessments
        ],
        "challenges": [
            {
                "id": c.id,
                "parent_question_id": c.parent_question_id,
                "domain_specific": c.domain_specific,
                "domain_agnostic": c.domain_agnostic,
                "priority_rank": c.priority_rank,
            }
            for c in artifact.challenges
        ],
        "source_domains": [
            {
                "id": d.id,
                "challenge_id": d.challenge_id,
                "coarse_field": d.coarse_field.value,
                "rationale": d.rationale,
                "rationale_kind": d.rationale_kind.value,
                "search_queries": list(d.search_queries),
                "gate_result": d.gate_result.value,
                "relevant_count": d.relevant_count,
                "retrieved_count": d.retrieved_count,
                "evidence": [_snippet_dict(s) for s in d.evidence],
                "prune_reason": d.prune_reason,
            }
            for d in artifact.source_domains
        ],
        "takeaways": [
            {
                "id": t.id,
                "source_domain_id": t.source_domain_id,
                "challenge_id": t.challenge_id,
                "concept": t.concept,
                "mechanism": t.mechanism,
                "supporting_paper_ids": list(t.supporting_paper_ids),
            }
            for t in artifact.takeaways
        ],
        "fragments": [fragment_to_dict(f) for f in artifact.fragments],
        "judgments": [
            {
                "fragment_a": j.fragment_a,
                "fragment_b": j.fragment_b,
                "verdict_ab": j.verdict_ab.value if j.verdict_ab else None,
                "verdict_ba": j.verdict_ba.value if j.verdict_ba else None,
                "resolved": j.resolved.value,
                "rationale": j.rationale,
            }
            for j in artifact.judgments
        ],
        "stage_checkpoints": {stage: ts for stage, ts in artifact.stage_checkpoints},
        "config_snapshot": dict(artifact.config_snapshot),
    }


def artifact_from_dict(data: Mapping[str, Any]) -> RunArtifact:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported artifact schema_version: {version!r}")
    p = data["problem"]
    order = {name: i for i, name in enumerate(STAGES)}
    checkpoints = sorted(data["stage_checkpoints"].items(), key=lambda kv: order.get(kv[0], len(order)))
    return RunArtifact(
        problem=ResearchProblem(
            statement=p["statement"],
            target_domain_fine=p["target_domain_fine"],
            target_domain_coarse=CoarseField(p["target_domain_coarse"]),
            cutoff_year=p["cutoff_year"],
        ),
        questions=tuple(
            QuestionPair(
                id=q["id"],
                domain_specific=q["domain_specific"],
                domain_agnostic=q["domain_agnostic"],
                search_queries=tuple(q["search_queries"]),
            )
            for q in data["questions"]
        ),
        assessments=tuple(
            CoverageAssessment(
                question_id=a["question_id"],
                klass=CoverageClass(a["klass"]),
                evidence=tuple(_snippet_from(s) for s in a["evidence"]),
                rationale=a["rationale"],
            )
            for a in data["assessments"]
        ),
        challenges=tuple(
            Challenge(
                id=c["id"],
                parent_question_id=c["parent_question_id"],
                domain_specific=c["domain_specific"],
                domain_agnostic=c["domain_agnostic"],
                priority_rank=c["priority_rank"],
            )
            for c in data["challenges"]
        ),
        source_domains=tuple(
            SourceDomain(
                id=d["id"],
                challenge_id=d["challenge_id"],
                coarse_field=CoarseField(d["coarse_field"]),
                rationale=d["rationale"],
                rationale_kind=RationaleKind(d["rationale_kind"]),
                search_queries=tuple(d["search_queries"]),
                gate_result=GateResult(d["gate_result"]),
                relevant_count=d["relevant_count"],
                retrieved_count=d["retrieved_count"],
                evidence=tuple(_snippet_from(s) for s in d["evidence"]),
                prune_reason=d["prune_reason"],
            )
            for d in data["source_domains"]
        ),
        takeaways=tuple(
            Takeaway(
                id=t["id"],
                source_domain_id=t["source_domain_id"],
                challenge_id=t["challenge_id"],
                concept=t["concept"],
                mechanism=t["mechanism"],
                supporting_paper_ids=tuple(t["supporting_paper_ids"]),
            )
            for t in data["takeaways"]
        ),
        fragments=tuple(fragment_from_dict(f) for f in data["fragments"]),
        judgments=tuple(
            PairwiseJudgment(
                fragment_a=j["fragment_a"],
                fragment_b=j["fragment_b"],
                verdict_ab=Verdict(j["verdict_ab"]) if j["verdict_ab"] else None,
                verdict_ba=Verdict(j["verdict_ba"]) if j["verdict_ba"] else None,
                resolved=Resolved(j["resolved"]),
                rationale=j["rationale"],
            )
            for j in data["judgments"]
        ),
        stage_checkpoints=tuple((stage, ts) for stage, ts in checkpoints),
        config_snapshot=dict(data["config_snapshot"]),
        schema_version=version,
    )


def canonical_serialize(artifact: RunArtifact) -> bytes:
    """Serialize an artifact to deterministic UTF-8 JSON bytes.

    Keys are sorted and separators fixed, so equal artifacts (regardless of
    map insertion order) produce identical bytes. Refuses artifacts with
    integrity violations, naming the first one.
    """
    violations = check_integrity(artifact)
    if violations:
        raise IntegrityError(violations[0])
    payload = artifact_to_dict(artifact)
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def canonical_deserialize(data: bytes | str) -> RunArtifact:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return artifact_from_dict(json.loads(data))
