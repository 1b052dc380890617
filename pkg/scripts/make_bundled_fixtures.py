#!/usr/bin/env python3
"""Regenerate the bundled human-AI collaboration replay fixtures.

Runs every strategy in record mode against the deterministic stub service
(tests/stub_s2.py) with mock model endpoints, writing raw-exchange fixtures
under fixtures/human_ai/ plus a fingerprint manifest. Output is deterministic,
so regeneration leaves committed fixtures unchanged.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from stub_s2 import make_transport  # noqa: E402

from idea_catalyst.config import ProfileConfig, Settings  # noqa: E402
from idea_catalyst.fields import CoarseField  # noqa: E402
from idea_catalyst.models import ResearchProblem, canonical_serialize  # noqa: E402
from idea_catalyst.pipeline import STRATEGIES, build_services, run_pipeline  # noqa: E402

FIXTURES_DIR = ROOT / "fixtures" / "human_ai"

PROBLEM = ResearchProblem(
    statement="Developing effective and reliable human-AI collaboration for open-ended, real-world tasks.",
    target_domain_fine="Human-Computer Interaction",
    target_domain_coarse=CoarseField.COMPUTER_SCIENCE,
    cutoff_year=2024,
)


def settings(mode: str) -> Settings:
    return Settings(
        retrieval_mode=mode,
        fixtures_dir=str(FIXTURES_DIR),
        rate_per_sec=10000,
        generator=ProfileConfig(
            name="generator", endpoint="mock://generator", model_id="mock-generator", temperature=0.7, no_thinking=True
        ),
        judge=ProfileConfig(name="judge", endpoint="mock://judge", model_id="mock-judge", temperature=0.0),
    )


def main() -> int:
    import tempfile

    from idea_catalyst.evaluation import StrategyConfig, load_records, run_arm

    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    recorder = build_services(settings("record"), retrieval_transport=make_transport())
    for strategy in STRATEGIES:
        artifact = run_pipeline(PROBLEM, recorder, strategy=strategy)
        print(f"recorded {strategy}: {len(artifact.fragments)} fragments")

    # Retrieval fixtures for the evaluate demo over two sample records.
    records = [r for r in load_records(ROOT / "data" / "sample_benchmark.jsonl") if r.id in ("r001", "r002")]
    with tempfile.TemporaryDirectory() as scratch:
        result = run_arm(StrategyConfig(strategy="idea_catalyst"), records, recorder, scratch)
    print(f"recorded evaluate demo: {result.records_completed} records")

    fingerprints = sorted(p.stem for p in FIXTURES_DIR.glob("*.json") if p.name != "manifest.json")
    (FIXTURES_DIR / "manifest.json").write_text(
        json.dumps({"fingerprints": fingerprints}, indent=1), encoding="utf-8"
    )
    print(f"{len(fingerprints)} fixtures, manifest written")

    replay_a = run_pipeline(PROBLEM, build_services(settings("replay")), strategy="idea_catalyst")
    replay_b = run_pipeline(PROBLEM, build_services(settings("replay")), strategy="idea_catalyst")
    if canonical_serialize(replay_a) != canonical_serialize(replay_b):
        print("replay runs are not byte-identical", file=sys.stderr)
        return 1
    print("replay self-check passed")

    # Golden report for the bundled run; generated with a repo-relative
    # fixtures path so it is machine-independent.
    import os

    from idea_catalyst.analysis import emit_run_report
    from idea_catalyst.config import Settings

    os.chdir(ROOT)
    relative = Settings(
        retrieval_mode="replay",
        fixtures_dir="fixtures/human_ai",
        rate_per_sec=10000,
        generator=settings("replay").generator,
        judge=settings("replay").judge,
    )
    golden_run = run_pipeline(PROBLEM, build_services(relative), strategy="idea_catalyst")
    golden_path = ROOT / "tests" / "data" / "golden_report.md"
    golden_path.parent.mkdir(parents=True, exist_ok=True)
    golden_path.write_text(emit_run_report(golden_run), encoding="utf-8")
    print(f"golden report written: {golden_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
