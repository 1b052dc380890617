"""Fragment generation, pairwise potential judging, and rank aggregation."""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from typing import Iterable, Mapping, Optional, Sequence

from .config import Settings
from .gateway import StructuredOutputError
from .models import (
    Challenge,
    ChallengeResolution,
    ConcreteRealization,
    ContractError,
    IdeaFragment,
    IntegrationMechanism,
    PairwiseJudgment,
    PaperSnippet,
    Resolved,
    SelectedTakeaway,
    SourceDomain,
    Takeaway,
    Verdict,
    make_id,
    validate_fragment,
)
from .textblocks import (
    render_evidence_block,
    render_fragment_text,
    render_takeaway_block,
    fragment_tree_dict,
)

logger = logging.getLogger(__name__)


def fragment_from_tree(
    tree: Mapping,
    fragment_id: str,
    source_domain_id: str,
    challenge_id: str,
    provenance: str = "method",
) -> IdeaFragment:
    return IdeaFragment(
        id=fragment_id,
        title=tree["title"].strip(),
        core_insight=tree["core_insight"].strip(),
        integration_mechanism=IntegrationMechanism(
            target_domain_elements=tuple(e.strip() for e in tree["integration_mechanism"]["target_domain_elements"]),
            selected_takeaways=tuple(
                SelectedTakeaway(
                    takeaway_id=sel["takeaway_id"],
                    source_domain_formulation=sel["source_domain_formulation"].strip(),
                    mechanism_explanation=sel["mechanism_explanation"].strip(),
                    selection_rationale=sel["selection_rationale"].strip(),
                )
                for sel in tree["integration_mechanism"]["selected_takeaways"]
            ),
            synthesis_approach=tree["integration_mechanism"]["synthesis_approach"].strip(),
        ),
        challenge_resolution=ChallengeResolution(
            addresses_target_challenge=tree["challenge_resolution"]["addresses_target_challenge"].strip(),
            addresses_source_limitations=tree["challenge_resolution"]["addresses_source_limitations"].strip(),
            addresses_research_problem=tree["challenge_resolution"]["addresses_research_problem"].strip(),
        ),
        concrete_realization=ConcreteRealization(
            proposed_approach=tree["concrete_realization"]["proposed_approach"].strip(),
            key_innovations=tuple(e.strip() for e in tree["concrete_realization"]["key_innovations"]),
        ),
        source_domain_id=source_domain_id,
        challenge_id=challenge_id,
        provenance=provenance,
    )


def generate_fragment(
    challenge: Challenge,
    target_evidence: Sequence[PaperSnippet],
    takeaways: Sequence[Takeaway],
    problem,
    gateway,
    settings: Settings,
    source_field_label: str = "",
) -> Optional[IdeaFragment]:
    """Integrate one (challenge, kept domain) pair into an idea fragment.

    Returns None when the model cannot produce a schema-valid fragment within
    the repair budget; the pipeline continues without it.
    """
    if not takeaways:
        raise ContractError("generate_fragment requires at least one takeaway")
    domain_ids = {t.source_domain_id for t in takeaways}
    if len(domain_ids) != 1:
        raise ContractError("all takeaways must come from one kept source domain")
    source_domain_id = next(iter(domain_ids))
    try:
        tree = gateway.call(
            "generator",
            "integrate",
            {
                "statement": problem.statement,
                "target_domain_fine": problem.target_domain_fine,
                "challenge_specific": challenge.domain_specific,
                "challenge_agnostic": challenge.domain_agnostic,
                "target_evidence_block": render_evidence_block(target_evidence) or "(no target evidence retrieved)",
                "takeaway_block": render_takeaway_block(takeaways),
                "source_field": source_field_label or source_domain_id,
                "max_title_words": 15,
            },
            "fragment",
            context={"takeaway_ids": [t.id for t in takeaways]},
        )
    except StructuredOutputError as exc:
        logger.warning("fragment skipped for challenge %s x %s: %s", challenge.id, source_domain_id, exc)
        return None
    return fragment_from_tree(
        tree,
        fragment_id=make_id("fragment", f"{challenge.id}:{source_domain_id}", 0),
        source_domain_id=source_domain_id,
        challenge_id=challenge.id,
    )


# ---------------------------------------------------------------------------
# Pairwise judging


def pair_key(id_a: str, id_b: str) -> tuple[str, str]:
    return (id_a, id_b) if id_a <= id_b else (id_b, id_a)


def compare_fragments(
    a: IdeaFragment,
    b: IdeaFragment,
    problem,
    gateway,
    cache: Optional[dict] = None,
    domain_labels: Optional[Mapping[str, str]] = None,
) -> PairwiseJudgment:
    """Judge one unordered pair in both presentation orders at the judge profile.

    Disagreement between orderings, or a judging failure in either ordering,
    resolves to a tie. Judgments are cached by unordered pair id so the mirror
    call returns the same judgment object.
    """
    if a.id == b.id:
        raise ContractError("compare_fragments requires two distinct fragments")
    key = pair_key(a.id, b.id)
    if cache is not None and key in cache:
        return cache[key]
    labels = domain_labels or {}
    text_a = render_fragment_text(a, labels.get(a.source_domain_id))
    text_b = render_fragment_text(b, labels.get(b.source_domain_id))

    def ask(first: str, second: str):
        return gateway.call(
            "judge",
            "compare",
            {
                "research_problem": problem.statement,
                "target_domain": problem.target_domain_fine,
                "fragment_1": first,
                "fragment_2": second,
            },
            "comparison",
        )

    verdict_ab: Optional[Verdict] = None
    verdict_ba: Optional[Verdict] = None
    notes = []
    try:
        first = ask(text_a, text_b)
        verdict_ab = Verdict.A if first["preferred_fragment"] == 1 else Verdict.B
        notes.append(first["rationale"])
    except StructuredOutputError as exc:
        notes.append(f"first ordering failed: {exc}")
    try:
        second = ask(text_b, text_a)
        verdict_ba = Verdict.B if second["preferred_fragment"] == 1 else Verdict.A
        notes.append(second["rationale"])
    except StructuredOutputError as exc:
        notes.append(f"second ordering failed: {exc}")

    if verdict_ab is Verdict.A and verdict_ba is Verdict.A:
        resolved = Resolved.A_WINS
    elif verdict_ab is Verdict.B and verdict_ba is Verdict.B:
        resolved = Resolved.B_WINS
    else:
        resolved = Resolved.TIE
    judgment = PairwiseJudgment(
        fragment_a=a.id,
        fragment_b=b.id,
        verdict_ab=verdict_ab,
        verdict_ba=verdict_ba,
        resolved=resolved,
        rationale=" | ".join(notes),
    )
    if cache is not None:
        cache[key] = judgment
    return judgment


# ---------------------------------------------------------------------------
# Rank aggregation


def copeland_scores(fragment_ids: Sequence[str], judgments: Iterable[PairwiseJudgment]) -> dict[str, int]:
    """Wins minus losses per fragment over a complete set of pair judgments."""
    scores = {fid: 0 for fid in fragment_ids}
    for j in judgments:
        if j.resolved is Resolved.A_WINS:
            scores[j.fragment_a] += 1
            scores[j.fragment_b] -= 1
        elif j.resolved is Resolved.B_WINS:
            scores[j.fragment_b] += 1
            scores[j.fragment_a] -= 1
    return scores


def rank_fragments(
    fragments: Sequence[IdeaFragment], judgments: Sequence[PairwiseJudgment]
) -> list[IdeaFragment]:
    """Copeland ranking: descending score, ties by ascending fragment id.

    Requires exactly one judgment per unordered pair; a missing or duplicated
    pair is a contract error naming the pair.
    """
    ids = [f.id for f in fragments]
    seen: dict[tuple[str, str], PairwiseJudgment] = {}
    for j in judgments:
        key = pair_key(j.fragment_a, j.fragment_b)
        if key in seen:
            raise ContractError(f"pair judged more than once: {key}")
        seen[key] = j
    expected = {pair_key(x, y) for i, x in enumerate(ids) for y in ids[i + 1 :]}
    missing = expected - set(seen)
    if missing:
        raise ContractError(f"missing pairwise judgment for pair: {sorted(missing)[0]}")
    extra = set(seen) - expected
    if extra:
        raise ContractError(f"judgment for unknown pair: {sorted(extra)[0]}")
    scores = copeland_scores(ids, judgments)
    ordered = sorted(fragments, key=lambda f: (-scores[f.id], f.id))
    return [
        replace(f, copeland_score=scores[f.id], final_rank=rank)
        for rank, f in enumerate(ordered, start=1)
    ]


def proportion_rank(
    fragments: Sequence[IdeaFragment], domains_by_id: Mapping[str, SourceDomain]
) -> list[IdeaFragment]:
    """Heuristic ranking by the domain's relevant-paper fraction (ablation arm)."""
    def fraction(f: IdeaFragment) -> float:
        d = domains_by_id[f.source_domain_id]
        if d.retrieved_count == 0:
            raise ContractError(f"kept domain {d.id} has zero retrieved papers")
        return d.relevant_count / d.retrieved_count

    ordered = sorted(fragments, key=lambda f: (-fraction(f), f.id))
    return [
        replace(f, copeland_score=None, final_rank=rank)
        for rank, f in enumerate(ordered, start=1)
    ]


# ---------------------------------------------------------------------------
# Conceptual rewriting (ablation "+ rewrite")


def _structure_signature(fragment: IdeaFragment) -> tuple:
    return (
        fragment.takeaway_ids(),
        len(fragment.integration_mechanism.target_domain_elements),
        len(fragment.integration_mechanism.selected_takeaways),
        len(fragment.concrete_realization.key_innovations),
    )


def conceptual_rewrite(fragment: IdeaFragment, gateway) -> IdeaFragment:
    """Rewrite prose fields for clarity with structure, ids, and grounding pinned.

    Structural drift (changed takeaway ids, dropped list entries, invalid
    result) discards the rewrite and keeps the original.
    """
    tree = fragment_tree_dict(fragment)
    try:
        rewritten_tree = gateway.call(
            "generator",
            "rewrite",
            {"fragment_json": json.dumps(tree, ensure_ascii=False, indent=1, sort_keys=True), "max_title_words": 15},
            "fragment",
            context={"takeaway_ids": list(fragment.takeaway_ids())},
        )
    except StructuredOutputError as exc:
        logger.warning("rewrite discarded for fragment %s: %s", fragment.id, exc)
        return fragment
    rewritten = fragment_from_tree(
        rewritten_tree,
        fragment_id=fragment.id,
        source_domain_id=fragment.source_domain_id,
        challenge_id=fragment.challenge_id,
        provenance=fragment.provenance,
    )
    rewritten = replace(rewritten, copeland_score=fragment.copeland_score, final_rank=fragment.final_rank)
    if _structure_signature(rewritten) != _structure_signature(fragment):
        logger.warning("rewrite discarded for fragment %s: structural drift", fragment.id)
        return fragment
    if validate_fragment(rewritten):
        logger.warning("rewrite discarded for fragment %s: failed validation", fragment.id)
        return fragment
    return rewritten
