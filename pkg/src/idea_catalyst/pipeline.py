"""Stage orchestration: strategies, checkpoints, resumable execution."""

from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import httpx

from . import integration, source_exploration, target_analysis
from ._concurrency import bounded_map
from .config import Settings, config_snapshot
from .fields import CoarseField, DomainMapper
from .gateway import LLMGateway, prompt_hashes
from .models import (
    Challenge,
    CoverageAssessment,
    CoverageClass,
    GateResult,
    QuestionPair,
    ResearchProblem,
    RunArtifact,
    canonical_serialize,
    make_id,
)
from .retrieval import RetrievalRequest, SnippetClient
from .textblocks import render_fields_block

logger = logging.getLogger(__name__)

STRATEGIES = (
    "idea_catalyst",
    "free_form_source",
    "guided_dual",
    "no_decompose",
    "no_potential_ranking",
    "plus_rewrite",
)

_FULL_PLAN = ("decomposition", "coverage", "challenges", "source_domains", "takeaways", "fragments", "ranking")

STAGE_PLANS: dict[str, tuple[str, ...]] = {
    "idea_catalyst": _FULL_PLAN,
    "no_potential_ranking": _FULL_PLAN,
    "plus_rewrite": _FULL_PLAN + ("rewrite",),
    "no_decompose": ("challenges", "source_domains", "takeaways", "fragments", "ranking"),
    "free_form_source": ("challenges", "source_domains", "takeaways", "fragments", "ranking"),
    "guided_dual": ("coverage", "challenges", "source_domains", "takeaways", "fragments", "ranking"),
}


class DeterministicClock:
    """Fixed-epoch counter clock so replay runs are byte-identical."""

    def __init__(self, offset: int = 0):
        self._n = offset

    def __call__(self) -> str:
        stamp = _dt.datetime(1970, 1, 1) + _dt.timedelta(seconds=self._n)
        self._n += 1
        return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class Services:
    """Everything a pipeline run needs, built once per process."""

    settings: Settings
    gateway: LLMGateway
    retriever: SnippetClient
    mapper: DomainMapper
    deterministic: bool

    def make_clock(self, offset: int = 0) -> Callable[[], str]:
        return DeterministicClock(offset) if self.deterministic else _utc_now


def build_services(
    settings: Settings,
    retrieval_transport: Optional[httpx.BaseTransport] = None,
    llm_transport: Optional[httpx.BaseTransport] = None,
    log_path: Optional[str] = None,
) -> Services:
    deterministic = settings.retrieval_mode == "replay"
    gateway = LLMGateway(
        profiles={"generator": settings.generator, "judge": settings.judge},
        mode=settings.retrieval_mode,
        fixtures_dir=settings.fixtures_dir,
        transport=llm_transport,
        log_path=log_path,
        in_flight_cap=settings.in_flight_cap,
        attempt_budget=settings.attempt_budget,
        clock=DeterministicClock() if deterministic else None,
    )
    retriever = SnippetClient(
        mode=settings.retrieval_mode,
        endpoint=settings.s2_endpoint,
        api_key=settings.s2_api_key,
        fixtures_dir=settings.fixtures_dir,
        cache_dir=settings.cache_dir if settings.retrieval_mode == "live" else None,
        rate_per_sec=settings.rate_per_sec,
        transport=retrieval_transport,
    )

    def classify(fine_domain: str) -> str:
        parsed = gateway.call(
            "generator",
            "classify_domain",
            {"fine_domain": fine_domain, "fields_block": render_fields_block(CoarseField)},
            "domain_classification",
        )
        return parsed["field"]

    mapper = DomainMapper(classifier=classify)
    return Services(
        settings=settings,
        gateway=gateway,
        retriever=retriever,
        mapper=mapper,
        deterministic=deterministic,
    )


# ---------------------------------------------------------------------------
# Shared retrieval helper


def _retrieve_for_queries(services: Services, queries, domain: CoarseField, cutoff_year):
    """Union retrieval over queries, deduplicated by paper id in query order."""
    seen: set[str] = set()
    merged = []
    for query in queries:
        req = RetrievalRequest(
            query=query,
            domain=domain,
            limit=services.settings.retrieval_limit,
            cutoff_year=cutoff_year,
        )
        for snippet in services.retriever.retrieve(req):
            if snippet.paper_id in seen:
                continue
            seen.add(snippet.paper_id)
            merged.append(snippet)
    return merged


# ---------------------------------------------------------------------------
# Stages


def _stage_decomposition(artifact: RunArtifact, services: Services) -> RunArtifact:
    questions = target_analysis.decompose_problem(artifact.problem, services.gateway, services.settings)
    return replace(artifact, questions=tuple(questions))


def _stage_coverage(artifact: RunArtifact, services: Services) -> RunArtifact:
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    problem = artifact.problem
    if strategy == "guided_dual":
        return _stage_coverage_guided(artifact, services)

    def work(question: QuestionPair) -> CoverageAssessment:
        evidence = _retrieve_for_queries(
            services, question.search_queries, problem.target_domain_coarse, problem.cutoff_year
        )
        return target_analysis.assess_coverage(
            question, evidence, services.gateway, problem.target_domain_fine
        )

    assessments = bounded_map(work, artifact.questions, services.settings.in_flight_cap)
    return replace(artifact, assessments=tuple(assessments))


def _stage_coverage_guided(artifact: RunArtifact, services: Services) -> RunArtifact:
    # Target context retrieval without decomposition or coverage classification:
    # the whole problem becomes one open question whose evidence is kept as
    # ideation context (relevance unassessed).
    problem = artifact.problem
    parsed = services.gateway.call(
        "generator",
        "target_queries",
        {
            "statement": problem.statement,
            "target_domain_fine": problem.target_domain_fine,
            "max_queries": services.settings.max_queries,
        },
        "queries",
    )
    queries = tuple(q.strip() for q in parsed["search_queries"][: services.settings.max_queries])
    key = target_analysis.problem_key(problem)
    question = QuestionPair(
        id=make_id("question", key, 0),
        domain_specific=f"How can progress be made on: {problem.statement} (in {problem.target_domain_fine})",
        domain_agnostic=f"How can progress be made on the underlying goal: {problem.statement}",
        search_queries=queries,
    )
    evidence = _retrieve_for_queries(services, queries, problem.target_domain_coarse, problem.cutoff_year)
    assessment = CoverageAssessment(
        question_id=question.id,
        klass=CoverageClass.OPEN,
        evidence=tuple(evidence),
        rationale="Target-domain context retrieved without coverage classification; the problem is explored whole.",
    )
    return replace(artifact, questions=(question,), assessments=(assessment,))


def _stage_challenges(artifact: RunArtifact, services: Services) -> RunArtifact:
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    problem = artifact.problem
    key = target_analysis.problem_key(problem)
    if strategy == "free_form_source":
        challenge = Challenge(
            id=make_id("challenge", key, 0),
            parent_question_id=None,
            domain_specific=f"{problem.statement} (as approached in {problem.target_domain_fine})",
            domain_agnostic=problem.statement,
            priority_rank=1,
        )
        return replace(artifact, challenges=(challenge,))
    if strategy == "no_decompose":
        parsed = services.gateway.call(
            "generator",
            "challenges_parametric",
            {
                "statement": problem.statement,
                "target_domain_fine": problem.target_domain_fine,
                "max_challenges": services.settings.max_challenges,
            },
            "challenges",
        )
        challenges = tuple(
            Challenge(
                id=make_id("challenge", key, i),
                parent_question_id=None,
                domain_specific=ch["domain_specific"].strip(),
                domain_agnostic=ch["domain_agnostic"].strip(),
                priority_rank=i + 1,
            )
            for i, ch in enumerate(parsed["challenges"][: services.settings.max_challenges])
        )
        return replace(artifact, challenges=challenges)

    assessments = artifact.assessment_by_question()
    collected: list[Challenge] = []
    for question in artifact.questions:
        assessment = assessments[question.id]
        if assessment.klass is CoverageClass.RESOLVED:
            continue
        collected.extend(
            target_analysis.extract_challenges(
                question, assessment, services.gateway, services.settings, problem.target_domain_fine
            )
        )
    ordered = target_analysis.exploration_order(collected, assessments)
    return replace(artifact, challenges=tuple(ordered))


def _stage_source_domains(artifact: RunArtifact, services: Services) -> RunArtifact:
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    problem = artifact.problem
    freeform = strategy == "free_form_source"
    template = "source_domains_freeform" if freeform else "source_domains"

    def propose(challenge: Challenge):
        return source_exploration.propose_source_domains(
            challenge,
            problem.target_domain_coarse,
            services.gateway,
            services.settings,
            template=template,
            exclude_target=not freeform,
            target_domain_fine=problem.target_domain_fine,
        )

    proposals = bounded_map(propose, artifact.challenges, services.settings.in_flight_cap)
    challenges_by_id = {c.id: c for c in artifact.challenges}
    units = [domain for batch in proposals for domain in batch]

    def explore(domain):
        challenge = challenges_by_id[domain.challenge_id]
        evidence = _retrieve_for_queries(
            services, domain.search_queries, domain.coarse_field, problem.cutoff_year
        )
        if freeform:
            # No metacognitive relevance screening: everything retrieved counts.
            flagged = tuple(s.with_relevance(True) for s in evidence)
        else:
            flagged = source_exploration.assess_relevance(domain, evidence, challenge, services.gateway)
        return source_exploration.gate_domain(domain, flagged)

    gated = bounded_map(explore, units, services.settings.in_flight_cap)
    challenge_pos = {c.id: i for i, c in enumerate(artifact.challenges)}
    gated.sort(key=lambda d: (challenge_pos[d.challenge_id], d.coarse_field.value, d.id))
    return replace(artifact, source_domains=tuple(gated))


def _stage_takeaways(artifact: RunArtifact, services: Services) -> RunArtifact:
    challenges_by_id = {c.id: c for c in artifact.challenges}
    kept = [d for d in artifact.source_domains if d.gate_result is GateResult.KEPT]

    def work(domain):
        challenge = challenges_by_id[domain.challenge_id]
        relevant = [s for s in domain.evidence if s.relevance is True]
        return source_exploration.extract_takeaways(domain, challenge, relevant, services.gateway)

    results = bounded_map(work, kept, services.settings.in_flight_cap)
    updated = {domain.id: domain for _batch, domain in results}
    takeaways = tuple(t for batch, _domain in results for t in batch)
    domains = tuple(updated.get(d.id, d) for d in artifact.source_domains)
    return replace(artifact, source_domains=domains, takeaways=takeaways)


def _stage_fragments(artifact: RunArtifact, services: Services) -> RunArtifact:
    problem = artifact.problem
    assessments = artifact.assessment_by_question()
    challenges_by_id = {c.id: c for c in artifact.challenges}
    takeaways_by_domain: dict[str, list] = {}
    for t in artifact.takeaways:
        takeaways_by_domain.setdefault(t.source_domain_id, []).append(t)

    pairs = []
    for challenge in artifact.challenges:
        for domain in artifact.source_domains:
            if domain.challenge_id != challenge.id or domain.gate_result is not GateResult.KEPT:
                continue
            batch = takeaways_by_domain.get(domain.id, [])
            if batch:
                pairs.append((challenge, domain, batch))
    # Bounds the O(n^2) comparison stage; challenges are already in
    # exploration-priority order, so truncation drops the lowest priority.
    pairs = pairs[: services.settings.fragment_cap]

    def target_evidence_for(challenge: Challenge):
        if challenge.parent_question_id is None:
            return []
        assessment = assessments.get(challenge.parent_question_id)
        if assessment is None:
            return []
        return [s for s in assessment.evidence if s.relevance is not False]

    def work(unit):
        challenge, domain, batch = unit
        return integration.generate_fragment(
            challenge,
            target_evidence_for(challenge),
            batch,
            problem,
            services.gateway,
            services.settings,
            source_field_label=domain.coarse_field.value,
        )

    produced = bounded_map(work, pairs, services.settings.in_flight_cap)
    fragments = tuple(f for f in produced if f is not None)
    return replace(artifact, fragments=fragments)


def _stage_ranking(artifact: RunArtifact, services: Services) -> RunArtifact:
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    fragments = list(artifact.fragments)
    if not fragments:
        return artifact
    domains = artifact.domain_by_id()
    if strategy == "no_potential_ranking":
        ranked = integration.proportion_rank(fragments, domains)
        return replace(artifact, fragments=tuple(ranked), judgments=())

    labels = {d.id: d.coarse_field.value for d in artifact.source_domains}
    ordered = sorted(fragments, key=lambda f: f.id)
    pairs = [(a, b) for i, a in enumerate(ordered) for b in ordered[i + 1 :]]
    cache: dict = {}

    def judge(pair):
        a, b = pair
        return integration.compare_fragments(
            a, b, artifact.problem, services.gateway, cache=cache, domain_labels=labels
        )

    judgments = bounded_map(judge, pairs, services.settings.in_flight_cap)
    ranked = integration.rank_fragments(fragments, judgments)
    return replace(artifact, fragments=tuple(ranked), judgments=tuple(judgments))


def _stage_rewrite(artifact: RunArtifact, services: Services) -> RunArtifact:
    def work(fragment):
        return integration.conceptual_rewrite(fragment, services.gateway)

    rewritten = bounded_map(work, artifact.fragments, services.settings.in_flight_cap)
    return replace(artifact, fragments=tuple(rewritten))


_STAGE_FNS: dict[str, Callable[[RunArtifact, Services], RunArtifact]] = {
    "decomposition": _stage_decomposition,
    "coverage": _stage_coverage,
    "challenges": _stage_challenges,
    "source_domains": _stage_source_domains,
    "takeaways": _stage_takeaways,
    "fragments": _stage_fragments,
    "ranking": _stage_ranking,
    "rewrite": _stage_rewrite,
}


# ---------------------------------------------------------------------------
# Run / resume


def flush_artifact(artifact: RunArtifact, out_path: str | Path) -> None:
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(canonical_serialize(artifact))
    tmp.rename(path)


def new_artifact(problem: ResearchProblem, services: Services, strategy: str) -> RunArtifact:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    snapshot = config_snapshot(services.settings, strategy, prompt_hashes())
    return RunArtifact(problem=problem, config_snapshot=snapshot)


def run_pipeline(
    problem: Optional[ResearchProblem],
    services: Services,
    strategy: str = "idea_catalyst",
    out_path: Optional[str | Path] = None,
    artifact: Optional[RunArtifact] = None,
) -> RunArtifact:
    """Execute (or continue) a run, checkpointing and flushing after each stage."""
    if artifact is None:
        if problem is None:
            raise ValueError("run_pipeline requires a problem or an existing artifact")
        artifact = new_artifact(problem, services, strategy)
    else:
        strategy = artifact.config_snapshot.get("strategy", strategy)
    plan = STAGE_PLANS[strategy]
    done = artifact.checkpoint_map()
    clock = services.make_clock(offset=len(artifact.stage_checkpoints))
    for stage in plan:
        if stage in done:
            continue
        logger.info("stage %s (strategy %s)", stage, strategy)
        artifact = _STAGE_FNS[stage](artifact, services)
        artifact = artifact.with_checkpoint(stage, clock())
        if out_path is not None:
            flush_artifact(artifact, out_path)
    return artifact


def missing_stages(artifact: RunArtifact) -> tuple[str, ...]:
    strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
    done = artifact.checkpoint_map()
    return tuple(stage for stage in STAGE_PLANS[strategy] if stage not in done)


def resume_pipeline(artifact: RunArtifact, services: Services, out_path: Optional[str | Path] = None) -> RunArtifact:
    """Continue a partial run from its first missing checkpoint, reusing all prior sections."""
    return run_pipeline(None, services, out_path=out_path, artifact=artifact)
