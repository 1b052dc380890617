"""Creative-reasoning stage: source-domain proposal, majority-relevance gating, takeaways."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Sequence

from .config import Settings
from .fields import CoarseField, MappingError
from .models import (
    Challenge,
    GateResult,
    PaperSnippet,
    RationaleKind,
    SourceDomain,
    Takeaway,
    make_id,
)
from .textblocks import render_evidence_block, render_fields_block

logger = logging.getLogger(__name__)

UNGROUNDED_REASON = "ungrounded takeaways"


def majority_keep(relevant: int, retrieved: int) -> bool:
    """Strict-majority gate: keep iff relevant/retrieved > 0.5.

    Exactly half relevant prunes; zero retrieved prunes. Integer arithmetic so
    the boundary is exact.
    """
    if retrieved <= 0:
        return False
    return 2 * relevant > retrieved


def propose_source_domains(
    challenge: Challenge,
    target_coarse: CoarseField,
    gateway,
    settings: Settings,
    template: str = "source_domains",
    exclude_target: bool = True,
    target_domain_fine: str = "",
) -> list[SourceDomain]:
    """Propose 2..max candidate fields for one challenge.

    Candidates naming a non-member field, or the target's own coarse field when
    exclusion applies, are dropped. If every candidate drops after one retry the
    challenge is unexplorable and an empty list is returned (not an error).
    """
    allowed = [f for f in CoarseField if not (exclude_target and f is target_coarse)]
    bindings = {
        "domain_agnostic": challenge.domain_agnostic,
        "statement": challenge.domain_specific,
        "target_coarse": target_coarse.value,
        "target_domain_fine": target_domain_fine,
        "fields_block": render_fields_block(allowed),
        "max_source_domains": settings.max_source_domains,
        "max_queries": settings.max_queries,
    }
    accepted: list[tuple[CoarseField, dict]] = []
    for _attempt in range(2):
        parsed = gateway.call("generator", template, bindings, "source_domains")
        accepted = []
        for cand in parsed["candidates"][: settings.max_source_domains]:
            try:
                coarse = CoarseField.from_label(cand["field"])
            except MappingError:
                logger.info("dropping candidate with non-member field %r", cand["field"])
                continue
            if exclude_target and coarse is target_coarse:
                logger.info("dropping candidate equal to target coarse field %s", coarse.value)
                continue
            accepted.append((coarse, cand))
        if accepted:
            break
    if not accepted:
        logger.warning("challenge %s is unexplorable: all proposed domains dropped", challenge.id)
        return []
    domains = []
    for i, (coarse, cand) in enumerate(accepted):
        domains.append(
            SourceDomain(
                id=make_id("domain", challenge.id, i),
                challenge_id=challenge.id,
                coarse_field=coarse,
                rationale=cand["rationale"].strip(),
                rationale_kind=RationaleKind(cand["rationale_kind"]),
                search_queries=tuple(q.strip() for q in cand["search_queries"][: settings.max_queries]),
            )
        )
    return domains


def assess_relevance(
    domain: SourceDomain,
    evidence: Sequence[PaperSnippet],
    challenge: Challenge,
    gateway,
) -> tuple[PaperSnippet, ...]:
    """Binary per-paper relevance against the challenge's domain-agnostic text,
    scored jointly in one structured call per domain."""
    if not evidence:
        return ()
    parsed = gateway.call(
        "generator",
        "relevance",
        {
            "field": domain.coarse_field.value,
            "challenge_agnostic": challenge.domain_agnostic,
            "evidence_block": render_evidence_block(evidence),
        },
        "relevance",
        context={"paper_ids": [s.paper_id for s in evidence]},
    )
    flags = {entry["paper_id"]: entry["relevant"] for entry in parsed["papers"]}
    return tuple(s.with_relevance(flags[s.paper_id]) for s in evidence)


def gate_domain(domain: SourceDomain, flagged_evidence: Sequence[PaperSnippet]) -> SourceDomain:
    """Apply the majority-relevance gate and record counts on the domain."""
    retrieved = len(flagged_evidence)
    relevant = sum(1 for s in flagged_evidence if s.relevance is True)
    kept = majority_keep(relevant, retrieved)
    reason = None
    if not kept:
        reason = "no papers retrieved" if retrieved == 0 else "majority of retrieved papers irrelevant"
    return replace(
        domain,
        gate_result=GateResult.KEPT if kept else GateResult.PRUNED,
        relevant_count=relevant,
        retrieved_count=retrieved,
        evidence=tuple(flagged_evidence),
        prune_reason=reason,
    )


def extract_takeaways(
    domain: SourceDomain,
    challenge: Challenge,
    relevant_evidence: Sequence[PaperSnippet],
    gateway,
) -> tuple[list[Takeaway], SourceDomain]:
    """Extract 1..3 grounded takeaways from a kept domain.

    Takeaways citing papers outside the relevant evidence are rejected and the
    batch regenerated once; if nothing grounded survives, the domain is demoted
    to pruned with the reason recorded.
    """
    if domain.gate_result is not GateResult.KEPT:
        raise ValueError(f"takeaways are only extracted from kept domains (got {domain.gate_result.value})")
    if not relevant_evidence or any(s.relevance is not True for s in relevant_evidence):
        raise ValueError("relevant_evidence must be non-empty and fully flagged relevant")
    allowed = {s.paper_id for s in relevant_evidence}
    bindings = {
        "field": domain.coarse_field.value,
        "challenge_agnostic": challenge.domain_agnostic,
        "challenge_specific": challenge.domain_specific,
        "evidence_block": render_evidence_block(relevant_evidence),
        "retry_note": "",
    }

    def grounded(parsed) -> tuple[list[dict], bool]:
        kept, dropped_any = [], False
        for entry in parsed["takeaways"]:
            cited = [pid for pid in entry["supporting_paper_ids"] if pid in allowed]
            if cited:
                kept.append({**entry, "supporting_paper_ids": cited})
            else:
                dropped_any = True
        return kept, dropped_any

    parsed = gateway.call("generator", "takeaways", bindings, "takeaways")
    kept, dropped_any = grounded(parsed)
    if dropped_any:
        retry_bindings = dict(
            bindings,
            retry_note=(
                "\nNote: a previous attempt cited papers that are not in the list above. "
                "Cite only the bracketed paper_ids shown.\n"
            ),
        )
        parsed = gateway.call("generator", "takeaways", retry_bindings, "takeaways")
        kept, _ = grounded(parsed)
    if not kept:
        logger.warning("domain %s demoted: %s", domain.id, UNGROUNDED_REASON)
        demoted = replace(domain, gate_result=GateResult.PRUNED, prune_reason=UNGROUNDED_REASON)
        return [], demoted
    takeaways = []
    for i, entry in enumerate(kept[:3]):
        takeaways.append(
            Takeaway(
                id=make_id("takeaway", domain.id, i),
                source_domain_id=domain.id,
                challenge_id=challenge.id,
                concept=entry["concept"].strip(),
                mechanism=entry["mechanism"].strip(),
                supporting_paper_ids=tuple(dict.fromkeys(entry["supporting_paper_ids"])),
            )
        )
    return takeaways, domain
