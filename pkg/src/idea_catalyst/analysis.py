"""Post-hoc analytics over run artifacts and deterministic report emission."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .models import RunArtifact, fragment_to_dict

logger = logging.getLogger(__name__)


def shannon_entropy(counts: Iterable[int], base: float = 2.0) -> float:
    """Shannon entropy of a count vector, zero counts ignored."""
    values = [c for c in counts if c > 0]
    total = sum(values)
    if total == 0:
        return 0.0
    h = 0.0
    for c in values:
        p = c / total
        h -= p * math.log(p)
    return h / math.log(base)


def normalized_entropy(counts: Mapping[str, int]) -> float:
    """H(counts) / log(number of nonzero categories); single category is 0 by convention.

    The ratio is base-independent; base 2 is used here.
    """
    nonzero = [c for c in counts.values() if c > 0]
    if len(nonzero) <= 1:
        return 0.0
    return shannon_entropy(nonzero, base=2.0) / math.log2(len(nonzero))


@dataclass(frozen=True)
class DistributionStats:
    counts: Mapping[str, int]
    normalized_entropy: float
    filtered_min_count: int


def domain_distribution(
    artifacts: Sequence[RunArtifact], top_k: int = 3, min_count: int = 10
) -> DistributionStats:
    """Source-domain counts over each artifact's top-k fragments.

    Fields with fewer than min_count occurrences are dropped before the
    entropy (entropy computed after filtering). Unranked artifacts are skipped
    with a warning.
    """
    counts: dict[str, int] = {}
    for artifact in artifacts:
        ranked = [f for f in artifact.fragments if f.final_rank is not None]
        if artifact.fragments and not ranked:
            logger.warning("skipping artifact without ranks (problem: %.40s)", artifact.problem.statement)
            continue
        domains = artifact.domain_by_id()
        for fragment in ranked:
            if fragment.final_rank <= top_k:
                label = domains[fragment.source_domain_id].coarse_field.value
                counts[label] = counts.get(label, 0) + 1
    filtered = {k: v for k, v in sorted(counts.items()) if v >= min_count}
    return DistributionStats(
        counts=filtered,
        normalized_entropy=normalized_entropy(filtered),
        filtered_min_count=min_count,
    )


def flow_table(
    artifacts: Sequence[RunArtifact],
    min_pair_count: int = 10,
    top_sources_per_target: int = 10,
    top_k: int = 3,
) -> list[tuple[str, str, int]]:
    """(target subfield, source field, count) rows over top-k fragments.

    Pairs below min_pair_count are dropped; per target only the most frequent
    top_sources_per_target sources are kept. Rows sort by (target, -count, source).
    """
    pair_counts: dict[tuple[str, str], int] = {}
    for artifact in artifacts:
        target = artifact.problem.target_domain_fine
        domains = artifact.domain_by_id()
        for fragment in artifact.fragments:
            if fragment.final_rank is None or fragment.final_rank > top_k:
                continue
            source = domains[fragment.source_domain_id].coarse_field.value
            pair_counts[(target, source)] = pair_counts.get((target, source), 0) + 1
    surviving = [(t, s, c) for (t, s), c in pair_counts.items() if c >= min_pair_count]
    surviving.sort(key=lambda row: (row[0], -row[2], row[1]))
    out: list[tuple[str, str, int]] = []
    per_target: dict[str, int] = {}
    for target, source, count in surviving:
        if per_target.get(target, 0) >= top_sources_per_target:
            continue
        per_target[target] = per_target.get(target, 0) + 1
        out.append((target, source, count))
    return out


# ---------------------------------------------------------------------------
# Reports


def _json_block(payload) -> str:
    return "```json\n" + json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n```"


def emit_run_report(artifact: RunArtifact) -> str:
    """Human-readable Markdown for one run; byte-identical for equal artifacts."""
    p = artifact.problem
    lines: list[str] = []
    add = lines.append
    add("# Ideation run report")
    add("")
    add("## Problem")
    add("")
    add(f"- statement: {p.statement}")
    add(f"- target domain: {p.target_domain_fine} (coarse: {p.target_domain_coarse.value})")
    add(f"- retrieval cutoff year: {p.cutoff_year if p.cutoff_year is not None else 'none'}")
    add("")
    add("## Configuration")
    add("")
    add(_json_block(dict(artifact.config_snapshot)))
    add("")
    add("## Stage checkpoints")
    add("")
    for stage, stamp in artifact.stage_checkpoints:
        add(f"- {stage}: {stamp}")
    add("")

    add("## Research questions")
    add("")
    if not artifact.questions:
        add("(none: this strategy skips decomposition)")
    for i, q in enumerate(artifact.questions, start=1):
        add(f"### Q{i} `{q.id}`")
        add("")
        add(f"- domain-specific: {q.domain_specific}")
        add(f"- domain-agnostic: {q.domain_agnostic}")
        add(f"- search queries: {', '.join(q.search_queries)}")
        add("")

    add("## Coverage")
    add("")
    if not artifact.assessments:
        add("(none)")
    for a in artifact.assessments:
        add(f"### Question `{a.question_id}`: {a.klass.value}")
        add("")
        add(a.rationale)
        add("")
        for s in a.evidence:
            flag = "relevant" if s.relevance else ("irrelevant" if s.relevance is False else "unassessed")
            add(f"- [{s.paper_id}] ({s.year}) {s.title} — {flag}, {s.source_kind.value}")
        add("")

    add("## Challenges")
    add("")
    if not artifact.challenges:
        add("(none)")
    for c in artifact.challenges:
        parent = c.parent_question_id or "none"
        add(f"### `{c.id}` (parent question: {parent}, priority {c.priority_rank})")
        add("")
        add(f"- domain-specific: {c.domain_specific}")
        add(f"- domain-agnostic: {c.domain_agnostic}")
        add("")

    add("## Source domains")
    add("")
    if not artifact.source_domains:
        add("(none)")
    for d in artifact.source_domains:
        add(
            f"### `{d.id}` {d.coarse_field.value} — {d.gate_result.value} "
            f"({d.relevant_count}/{d.retrieved_count} relevant)"
        )
        add("")
        add(f"- challenge: {d.challenge_id}")
        add(f"- rationale ({d.rationale_kind.value}): {d.rationale}")
        add(f"- queries: {', '.join(d.search_queries)}")
        if d.prune_reason:
            add(f"- prune reason: {d.prune_reason}")
        add("")

    add("## Takeaways")
    add("")
    if not artifact.takeaways:
        add("(none)")
    for t in artifact.takeaways:
        add(f"### `{t.id}` ({t.source_domain_id})")
        add("")
        add(f"- concept: {t.concept}")
        add(f"- mechanism: {t.mechanism}")
        add(f"- cites: {', '.join(t.supporting_paper_ids)}")
        add("")

    add("## Ranked idea fragments")
    add("")
    if not artifact.fragments:
        add("No interdisciplinary fragments were produced by this run "
            "(no source domain survived gating, or integration failed).")
        add("")
    ranked = sorted(
        artifact.fragments,
        key=lambda f: (f.final_rank if f.final_rank is not None else 10**9, f.id),
    )
    for f in ranked:
        rank = f"rank {f.final_rank}" if f.final_rank is not None else "unranked"
        score = f", score {f.copeland_score}" if f.copeland_score is not None else ""
        add(f"### {rank}{score}: {f.title}")
        add("")
        add(_json_block(fragment_to_dict(f)))
        add("")

    if artifact.judgments:
        add("## Pairwise judgments")
        add("")
        add(f"{len(artifact.judgments)} unordered pairs judged in both presentation orders.")
        add("")
        for j in artifact.judgments:
            add(f"- ({j.fragment_a}, {j.fragment_b}): {j.resolved.value}")
        add("")
    return "\n".join(lines)


def emit_stats_report(stats: DistributionStats, flows: Sequence[tuple[str, str, int]]) -> str:
    lines = [
        "# Source-domain distribution",
        "",
        f"Entropy computed after dropping fields with fewer than {stats.filtered_min_count} occurrences.",
        "",
        _json_block(
            {
                "counts": dict(stats.counts),
                "normalized_entropy": round(stats.normalized_entropy, 6),
                "filtered_min_count": stats.filtered_min_count,
            }
        ),
        "",
        "# Target-source flow",
        "",
    ]
    if not flows:
        lines.append("(no pairs above threshold)")
    else:
        lines.append("| target subfield | source field | count |")
        lines.append("| --- | --- | --- |")
        for target, source, count in flows:
            lines.append(f"| {target} | {source} | {count} |")
    lines.append("")
    return "\n".join(lines)


def emit_report(payload, flows: Sequence[tuple[str, str, int]] = ()) -> str:
    """Dispatching report emitter for runs, stats, and rate tables."""
    if isinstance(payload, RunArtifact):
        return emit_run_report(payload)
    if isinstance(payload, DistributionStats):
        return emit_stats_report(payload, flows)
    if isinstance(payload, Mapping):
        return "# Evaluation rate table\n\n" + _json_block(dict(payload)) + "\n"
    raise TypeError(f"cannot emit a report for {type(payload).__name__}")
