"""Shared fixtures: mock-backed settings, scripted gateways, recorded eval workspace."""

from __future__ import annotations

import json
from collections import defaultdict, deque
from pathlib import Path

import httpx
import pytest

from stub_s2 import make_transport

from idea_catalyst.config import ProfileConfig, Settings
from idea_catalyst.evaluation import StrategyConfig, load_records, run_arm
from idea_catalyst.fields import CoarseField
from idea_catalyst.models import (
    ChallengeResolution,
    ConcreteRealization,
    IdeaFragment,
    IntegrationMechanism,
    PaperSnippet,
    ResearchProblem,
    SelectedTakeaway,
    SourceKind,
)
from idea_catalyst.pipeline import STRATEGIES, build_services, run_pipeline

REPO_ROOT = Path(__file__).resolve().parents[1]
BUNDLED_FIXTURES = REPO_ROOT / "fixtures" / "human_ai"
SAMPLE_BENCHMARK = REPO_ROOT / "data" / "sample_benchmark.jsonl"

HUMAN_AI_PROBLEM = ResearchProblem(
    statement="Developing effective and reliable human-AI collaboration for open-ended, real-world tasks.",
    target_domain_fine="Human-Computer Interaction",
    target_domain_coarse=CoarseField.COMPUTER_SCIENCE,
    cutoff_year=2024,
)


def mock_profiles() -> dict[str, ProfileConfig]:
    return {
        "generator": ProfileConfig(
            name="generator", endpoint="mock://generator", model_id="mock-generator", temperature=0.7, no_thinking=True
        ),
        "judge": ProfileConfig(name="judge", endpoint="mock://judge", model_id="mock-judge", temperature=0.0),
    }


def mock_settings(mode: str, fixtures_dir, **overrides) -> Settings:
    profiles = mock_profiles()
    base = dict(
        retrieval_mode=mode,
        fixtures_dir=str(fixtures_dir) if fixtures_dir else None,
        rate_per_sec=10000,
        generator=profiles["generator"],
        judge=profiles["judge"],
    )
    base.update(overrides)
    return Settings(**base)


@pytest.fixture()
def stub_transport():
    return make_transport()


@pytest.fixture(scope="session")
def human_ai_problem():
    return HUMAN_AI_PROBLEM


@pytest.fixture(scope="session")
def bundled_fixtures_dir():
    assert BUNDLED_FIXTURES.exists(), "bundled fixtures missing; run scripts/make_bundled_fixtures.py"
    return BUNDLED_FIXTURES


class ScriptedGateway:
    """Gateway stand-in returning queued parsed objects per schema name."""

    def __init__(self):
        self.queues: dict[str, deque] = defaultdict(deque)
        self.calls: list[tuple] = []

    def push(self, schema_name: str, *items) -> None:
        self.queues[schema_name].extend(items)

    def call(self, profile_name, template_id, bindings, schema_name, context=None, temperature=None):
        self.calls.append((profile_name, template_id, dict(bindings), schema_name, temperature))
        queue = self.queues[schema_name]
        if not queue:
            raise AssertionError(f"no scripted response queued for schema {schema_name!r}")
        item = queue.popleft()
        if isinstance(item, Exception):
            raise item
        if callable(item):
            return item(bindings)
        return item


@pytest.fixture()
def scripted_gateway():
    return ScriptedGateway()


def chat_transport(responses):
    """OpenAI-compatible endpoint replying with queued message contents."""
    queue = deque(responses)

    def handler(request: httpx.Request) -> httpx.Response:
        content = queue.popleft()
        return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})

    return httpx.MockTransport(handler)


def make_snippet(pid: str, year=2020, text=None, relevance=None, domain=CoarseField.PSYCHOLOGY, query="q"):
    return PaperSnippet(
        paper_id=pid,
        title=f"Title of {pid}",
        year=year,
        snippet_text=text or f"Snippet text of {pid}.",
        source_kind=SourceKind.SNIPPET,
        query=query,
        domain=domain,
        relevance=relevance,
    )


def make_fragment(fid: str, title="A compact cross-domain idea", takeaway_ids=("t1",), core=None, **overrides):
    fields = dict(
        id=fid,
        title=title,
        core_insight=core or f"Core insight of {fid}. It couples two literatures.",
        integration_mechanism=IntegrationMechanism(
            target_domain_elements=("existing target method",),
            selected_takeaways=tuple(
                SelectedTakeaway(
                    takeaway_id=tid,
                    source_domain_formulation=f"source framing via {tid}",
                    mechanism_explanation="the borrowed mechanism",
                    selection_rationale="fits the gap",
                )
                for tid in takeaway_ids
            ),
            synthesis_approach="wire the loop into the pipeline",
        ),
        challenge_resolution=ChallengeResolution(
            addresses_target_challenge="handles the stated gap",
            addresses_source_limitations="grounds the construct",
            addresses_research_problem="advances the problem",
        ),
        concrete_realization=ConcreteRealization(
            proposed_approach="a two-level controller",
            key_innovations=("explicit regulation state", "meta-level adaptation"),
        ),
        source_domain_id="dom1",
        challenge_id="ch1",
    )
    fields.update(overrides)
    return IdeaFragment(**fields)


@pytest.fixture(scope="session")
def eval_workspace(tmp_path_factory):
    """Record fixtures for a 3-record benchmark subset, then replay every arm.

    Returns paths plus per-arm artifacts loaded back from disk.
    """
    base = tmp_path_factory.mktemp("eval_ws")
    fixtures_dir = base / "fixtures"
    records = [r for r in load_records(SAMPLE_BENCHMARK) if r.id in ("r001", "r002", "r004")]
    assert len(records) == 3

    recorder = build_services(mock_settings("record", fixtures_dir), retrieval_transport=make_transport())
    results = {}
    for strategy in STRATEGIES:
        run_arm(StrategyConfig(strategy=strategy), records, recorder, base / "record_out" / strategy)

    replayer = build_services(mock_settings("replay", fixtures_dir))
    artifacts = {}
    for strategy in STRATEGIES:
        out_dir = base / "replay_out" / strategy
        results[strategy] = run_arm(StrategyConfig(strategy=strategy), records, replayer, out_dir)
        from idea_catalyst.models import canonical_deserialize

        artifacts[strategy] = {
            r.id: canonical_deserialize((out_dir / r.id / f"{strategy}.json").read_bytes()) for r in records
        }
    return {
        "base": base,
        "fixtures_dir": fixtures_dir,
        "records": records,
        "results": results,
        "artifacts": artifacts,
    }
