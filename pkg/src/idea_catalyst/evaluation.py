"""Judge-based evaluation harness: eligibility filtering, ground-truth
restructuring, pairwise judging against ground truth, and win-rate@k tables."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .config import WINRATE_RULE
from .fields import DomainMapper, MappingError
from .gateway import StructuredOutputError
from .models import ContractError, IdeaFragment, RunArtifact, make_id
from .pipeline import STRATEGIES, Services, run_pipeline
from .integration import fragment_from_tree
from .textblocks import (
    fragment_tree_dict,
    render_selected_takeaway_texts,
    render_takeaway_texts,
)

logger = logging.getLogger(__name__)

LEVELS = ("takeaway", "idea")
CRITERIA_BY_LEVEL = {
    "takeaway": ("insightfulness", "relevance", "overall"),
    "idea": ("novelty", "usefulness", "overall"),
}

_JUDGE_TEMPLATES = {"takeaway": "judge_takeaway", "idea": "judge_idea"}
_JUDGE_SCHEMAS = {"takeaway": "judge_takeaway", "idea": "judge_idea"}
_CRITERION_KEYS = {
    "takeaway": {
        "insightfulness": "interdisciplinary_insightfulness",
        "relevance": "interdisciplinary_relevance",
    },
    "idea": {
        "novelty": "interdisciplinary_novelty",
        "usefulness": "interdisciplinary_usefulness",
    },
}
_BLOCK_KEYS = {"takeaway": "takeaway_comparison", "idea": "idea_comparison"}


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark instance linking a target contribution to its source inspiration."""

    id: str
    target_text: str
    source_text: str
    target_domain_fine: str
    source_domain_fine: str
    relation: str
    problem_context: str
    arxiv_year: Optional[int]
    leakage_checked: bool


@dataclass(frozen=True)
class Rejection:
    record_id: str
    reason: str


@dataclass(frozen=True)
class JudgeVerdict:
    record_id: str
    level: str
    criterion: str
    preferred: str  # "method" | "ground_truth"
    reasoning: str

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")
        if self.criterion not in CRITERIA_BY_LEVEL[self.level]:
            raise ValueError(f"criterion {self.criterion!r} does not belong to level {self.level!r}")
        if self.preferred not in ("method", "ground_truth"):
            raise ValueError(f"preferred must be method or ground_truth, got {self.preferred!r}")


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")


def load_records(path: str | Path) -> list[BenchRecord]:
    """Parse a JSON-lines benchmark file, one record per line."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        raw = json.loads(line)
        record_id = str(raw.get("id") or hashlib.sha256(line.encode("utf-8")).hexdigest()[:12])
        records.append(
            BenchRecord(
                id=record_id,
                target_text=raw.get("target_text", ""),
                source_text=raw.get("source_text", ""),
                target_domain_fine=raw.get("target_domain_fine", ""),
                source_domain_fine=raw.get("source_domain_fine", ""),
                relation=raw.get("relation", ""),
                problem_context=raw.get("problem_context", ""),
                arxiv_year=raw.get("arxiv_year"),
                leakage_checked=bool(raw.get("leakage_checked", False)),
            )
        )
    return records


def filter_dataset(
    records: Sequence[BenchRecord], mapper: DomainMapper
) -> tuple[list[BenchRecord], list[Rejection]]:
    """Pure eligibility predicate; each rejection carries the failed criterion."""
    eligible: list[BenchRecord] = []
    rejections: list[Rejection] = []
    for record in records:
        if record.relation != "inspiration":
            rejections.append(Rejection(record.id, "relation"))
            continue
        if not record.target_domain_fine.strip() or not record.source_domain_fine.strip():
            rejections.append(Rejection(record.id, "missing_domain"))
            continue
        if not record.leakage_checked:
            rejections.append(Rejection(record.id, "leakage_unchecked"))
            continue
        if record.arxiv_year is None:
            rejections.append(Rejection(record.id, "missing_year"))
            continue
        try:
            target_coarse = mapper.map(record.target_domain_fine)
            source_coarse = mapper.map(record.source_domain_fine)
        except MappingError:
            rejections.append(Rejection(record.id, "domain_mapping"))
            continue
        if target_coarse is source_coarse:
            rejections.append(Rejection(record.id, "same_coarse_field"))
            continue
        eligible.append(record)
    return eligible, rejections


def screen_leakage(records: Sequence[BenchRecord], gateway) -> list[dict[str, Any]]:
    """Advisory judge-assisted leakage screening; never filters records itself.

    The eligibility gate trusts the ingestion-supplied leakage_checked flag;
    this screen only reports records whose problem context appears to reveal
    the source insight.
    """
    findings = []
    for record in records:
        parsed = gateway.call(
            "judge",
            "leakage_screen",
            {"problem_context": record.problem_context, "source_text": record.source_text},
            "leakage_screen",
        )
        findings.append({"record_id": record.id, "leaks": parsed["leaks"], "reasoning": parsed["reasoning"]})
    return findings


# ---------------------------------------------------------------------------
# Ground truth restructuring


def restructure_ground_truth(record: BenchRecord, gateway) -> IdeaFragment:
    """Reorganize a record's abstract and context into the fragment shape.

    Generation is pinned to temperature 0; one containment spot-check can
    trigger one regeneration. Structured-output failure propagates so the
    harness can exclude the record.
    """
    if not record.problem_context.strip():
        raise ContractError(f"record {record.id} has an empty problem context")
    bindings = {
        "target_text": record.target_text,
        "source_text": record.source_text,
        "problem_context": record.problem_context,
        "target_domain_fine": record.target_domain_fine,
        "source_domain_fine": record.source_domain_fine,
        "max_title_words": 15,
    }

    def generate() -> Mapping[str, Any]:
        return gateway.call("generator", "restructure", bindings, "fragment", temperature=0.0)

    tree = generate()
    check = gateway.call(
        "judge",
        "containment",
        {
            "fragment_json": json.dumps(tree, ensure_ascii=False, indent=1, sort_keys=True),
            "target_text": record.target_text,
            "source_text": record.source_text,
            "problem_context": record.problem_context,
        },
        "containment",
    )
    if not check["contained"]:
        logger.info("record %s ground truth regenerated (containment issues: %s)", record.id, check.get("issues"))
        tree = generate()
    return fragment_from_tree(
        tree,
        fragment_id=make_id("fragment", f"gt:{record.id}", 0),
        source_domain_id="",
        challenge_id="",
        provenance="ground_truth",
    )


# ---------------------------------------------------------------------------
# Judging


@dataclass(frozen=True)
class IdeaView:
    """What the idea-level judge sees for one side of a comparison."""

    source_domain: str
    proposed_approach: str
    key_innovations: tuple[str, ...]
    takeaway_text: str


def method_takeaway_text(fragment: IdeaFragment, run: RunArtifact) -> str:
    takeaways = run.takeaway_by_id()
    selected = [takeaways[tid] for tid in fragment.takeaway_ids() if tid in takeaways]
    return render_takeaway_texts(selected)


def method_idea_view(fragment: IdeaFragment, run: RunArtifact) -> IdeaView:
    domain = run.domain_by_id().get(fragment.source_domain_id)
    return IdeaView(
        source_domain=domain.coarse_field.value if domain else "unspecified",
        proposed_approach=fragment.concrete_realization.proposed_approach,
        key_innovations=fragment.concrete_realization.key_innovations,
        takeaway_text=method_takeaway_text(fragment, run),
    )


def ground_truth_takeaway_text(fragment: IdeaFragment) -> str:
    return render_selected_takeaway_texts(fragment)


def ground_truth_idea_view(fragment: IdeaFragment, record: BenchRecord) -> IdeaView:
    return IdeaView(
        source_domain=record.source_domain_fine,
        proposed_approach=fragment.concrete_realization.proposed_approach,
        key_innovations=fragment.concrete_realization.key_innovations,
        takeaway_text=ground_truth_takeaway_text(fragment),
    )


def judge_pair(
    problem: str,
    target_domain: str,
    method_output,
    ground_truth,
    level: str,
    gateway,
    record_id: str = "",
    method_slot: int = 1,
) -> list[JudgeVerdict]:
    """One verdict per criterion plus overall, at the stated level.

    method_slot (1 or 2) places the method as Method 1 or Method 2 in the
    prompt; the harness alternates it per record to neutralize position bias.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    if method_slot not in (1, 2):
        raise ValueError("method_slot must be 1 or 2")
    if level == "takeaway":
        texts = {1: method_output, 2: ground_truth} if method_slot == 1 else {1: ground_truth, 2: method_output}
        bindings = {
            "research_problem": problem,
            "target_domain": target_domain,
            "method_1_text": texts[1],
            "method_2_text": texts[2],
        }
    else:
        views: dict[int, IdeaView] = (
            {1: method_output, 2: ground_truth} if method_slot == 1 else {1: ground_truth, 2: method_output}
        )
        bindings = {"research_problem": problem, "target_domain": target_domain}
        for slot, view in views.items():
            bindings[f"method_{slot}_source_domain"] = view.source_domain
            bindings[f"method_{slot}_proposed_approach"] = view.proposed_approach
            bindings[f"method_{slot}_key_innovations"] = json.dumps(list(view.key_innovations), ensure_ascii=False)
            bindings[f"method_{slot}_text"] = view.takeaway_text
    parsed = gateway.call("judge", _JUDGE_TEMPLATES[level], bindings, _JUDGE_SCHEMAS[level])

    def preferred_of(block: Mapping[str, Any]) -> str:
        return "method" if block["preferred_method"] == method_slot else "ground_truth"

    verdicts = []
    comparison = parsed[_BLOCK_KEYS[level]]
    for criterion, key in _CRITERION_KEYS[level].items():
        block = comparison[key]
        verdicts.append(
            JudgeVerdict(
                record_id=record_id,
                level=level,
                criterion=criterion,
                preferred=preferred_of(block),
                reasoning=block["reasoning"],
            )
        )
    overall = parsed["overall_assessment"]
    verdicts.append(
        JudgeVerdict(
            record_id=record_id,
            level=level,
            criterion="overall",
            preferred=preferred_of(overall),
            reasoning=overall["summary"],
        )
    )
    return verdicts


# ---------------------------------------------------------------------------
# Win rates


def winrate_at_k(
    table: Mapping[str, Sequence[Sequence[JudgeVerdict]]], k: int
) -> dict[str, float]:
    """Per-criterion win rate over each record's top-k outputs.

    Averaging: within-record mean over its (up to k) outputs first, then mean
    across records; only valid comparisons count. Reported to two decimals.
    """
    record_means: dict[str, list[float]] = {}
    for record_id in table:
        outputs = list(table[record_id])[:k]
        if len(list(table[record_id])) < k:
            logger.info("record %s has fewer than k=%d outputs; averaging over what exists", record_id, k)
        indicator: dict[str, list[int]] = {}
        for verdicts in outputs:
            for v in verdicts:
                indicator.setdefault(v.criterion, []).append(1 if v.preferred == "method" else 0)
        for criterion, values in indicator.items():
            record_means.setdefault(criterion, []).append(sum(values) / len(values))
    return {
        criterion: round(100.0 * math.fsum(means) / len(means), 2)
        for criterion, means in sorted(record_means.items())
    }


# ---------------------------------------------------------------------------
# Arm orchestration


@dataclass
class ArmResult:
    strategy: str
    ks: tuple[int, ...]
    rates: dict[str, dict[str, dict[int, float]]]  # level -> criterion -> k -> rate
    records_total: int
    records_eligible: int
    records_completed: int
    records_failed: int
    exclusions: int
    rejections: list[Rejection]

    def to_table(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "averaging": WINRATE_RULE,
            "ks": list(self.ks),
            "rates": {
                level: {crit: {str(k): rate for k, rate in by_k.items()} for crit, by_k in crits.items()}
                for level, crits in self.rates.items()
            },
            "records_total": self.records_total,
            "records_eligible": self.records_eligible,
            "records_completed": self.records_completed,
            "records_failed": self.records_failed,
            "invalid_verdicts": self.exclusions,
            "rejections": [{"record_id": r.record_id, "reason": r.reason} for r in self.rejections],
        }

    def to_text(self) -> str:
        lines = [
            f"arm: {self.strategy}",
            f"averaging: {WINRATE_RULE}",
            f"records: total={self.records_total} eligible={self.records_eligible} "
            f"completed={self.records_completed} failed={self.records_failed} "
            f"invalid_verdicts={self.exclusions}",
            "",
        ]
        for level in LEVELS:
            crits = self.rates.get(level, {})
            if not crits:
                continue
            lines.append(f"[{level}]")
            header = "criterion".ljust(16) + "".join(f"@{k}".rjust(10) for k in self.ks)
            lines.append(header)
            for criterion in CRITERIA_BY_LEVEL[level]:
                if criterion not in crits:
                    continue
                row = criterion.ljust(16)
                for k in self.ks:
                    rate = crits[criterion].get(k)
                    row += (f"{rate:.2f}" if rate is not None else "-").rjust(10)
                lines.append(row)
            lines.append("")
        return "\n".join(lines)


def _record_problem(record: BenchRecord, services: Services):
    from .models import ResearchProblem

    return ResearchProblem(
        statement=record.problem_context,
        target_domain_fine=record.target_domain_fine,
        target_domain_coarse=services.mapper.map(record.target_domain_fine),
        cutoff_year=record.arxiv_year,
    )


def run_arm(
    strategy_config: StrategyConfig,
    records: Sequence[BenchRecord],
    services: Services,
    out_dir: str | Path,
    ks: Sequence[int] = (1, 2, 3),
) -> ArmResult:
    """Run one strategy arm over a record set and compute win-rate tables.

    Per-record failures are isolated and counted; artifacts land under
    out_dir/<record_id>/<strategy>.json next to the ground-truth fragment.
    """
    out_dir = Path(out_dir)
    strategy = strategy_config.strategy
    settings = services.settings
    for key, value in strategy_config.overrides.items():
        settings = replace(settings, **{key: value})
    arm_services = replace(services, settings=settings)

    eligible, rejections = filter_dataset(records, services.mapper)
    table: dict[str, list[list[JudgeVerdict]]] = {}
    exclusions = 0
    completed = 0
    failed = 0
    max_k = max(ks)

    for index, record in enumerate(eligible):
        method_slot = 1 if index % 2 == 0 else 2
        try:
            problem = _record_problem(record, arm_services)
            artifact_path = out_dir / record.id / f"{strategy}.json"
            artifact = run_pipeline(problem, arm_services, strategy=strategy, out_path=artifact_path)
            ground_truth = restructure_ground_truth(record, arm_services.gateway)
            gt_path = out_dir / record.id / "ground_truth.json"
            gt_path.parent.mkdir(parents=True, exist_ok=True)
            gt_path.write_text(
                json.dumps(fragment_tree_dict(ground_truth), ensure_ascii=False, indent=1, sort_keys=True),
                encoding="utf-8",
            )
        except Exception:
            logger.exception("record %s failed under arm %s", record.id, strategy)
            failed += 1
            continue

        ranked = sorted(
            (f for f in artifact.fragments if f.final_rank is not None),
            key=lambda f: f.final_rank,
        )[:max_k]
        outputs: list[list[JudgeVerdict]] = []
        for fragment in ranked:
            verdicts: list[JudgeVerdict] = []
            try:
                verdicts.extend(
                    judge_pair(
                        record.problem_context,
                        record.target_domain_fine,
                        method_takeaway_text(fragment, artifact),
                        ground_truth_takeaway_text(ground_truth),
                        "takeaway",
                        arm_services.gateway,
                        record_id=record.id,
                        method_slot=method_slot,
                    )
                )
            except StructuredOutputError:
                exclusions += 1
            try:
                verdicts.extend(
                    judge_pair(
                        record.problem_context,
                        record.target_domain_fine,
                        method_idea_view(fragment, artifact),
                        ground_truth_idea_view(ground_truth, record),
                        "idea",
                        arm_services.gateway,
                        record_id=record.id,
                        method_slot=method_slot,
                    )
                )
            except StructuredOutputError:
                exclusions += 1
            outputs.append(verdicts)
        table[record.id] = outputs
        completed += 1

    rates: dict[str, dict[str, dict[int, float]]] = {level: {} for level in LEVELS}
    for level in LEVELS:
        level_table = {
            rid: [[v for v in verdicts if v.level == level] for verdicts in outputs]
            for rid, outputs in table.items()
        }
        for k in ks:
            for criterion, rate in winrate_at_k(level_table, k).items():
                rates[level].setdefault(criterion, {})[k] = rate

    return ArmResult(
        strategy=strategy,
        ks=tuple(ks),
        rates=rates,
        records_total=len(records),
        records_eligible=len(eligible),
        records_completed=completed,
        records_failed=failed,
        exclusions=exclusions,
        rejections=rejections,
    )


def write_rate_tables(result: ArmResult, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"rates_{result.strategy}.json"
    text_path = out_dir / f"rates_{result.strategy}.txt"
    json_path.write_text(
        json.dumps(result.to_table(), ensure_ascii=False, indent=1, sort_keys=True), encoding="utf-8"
    )
    text_path.write_text(result.to_text(), encoding="utf-8")
    return json_path, text_path
