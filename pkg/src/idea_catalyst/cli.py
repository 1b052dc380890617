"""Single entry point: ideate, resume, evaluate, analyze, cache, fixtures."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .analysis import domain_distribution, emit_run_report, emit_stats_report, flow_table
from .config import ConfigError, Settings, load_settings, require_generator, require_judge
from .evaluation import StrategyConfig, load_records, run_arm, write_rate_tables
from .fields import CoarseField, MappingError
from .models import canonical_deserialize
from .pipeline import STRATEGIES, build_services, missing_stages, resume_pipeline, run_pipeline
from .retrieval import RetrievalRequest, SnippetClient, cache_stats, purge_cache, request_fingerprint, verify_fixtures

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(ctx: click.Context, **flags) -> Settings:
    merged = dict(ctx.obj["flags"])
    merged.update({k: v for k, v in flags.items() if v is not None})
    try:
        return load_settings(ctx.obj["config_file"], flags=merged)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
        raise  # unreachable


@click.group()
@click.option("--config", "config_file", type=click.Path(), default=None, help="YAML config file.")
@click.option("--retrieval-mode", type=click.Choice(["live", "replay", "record"]), default=None)
@click.option("--fixtures-dir", type=click.Path(), default=None)
@click.option("-v", "--verbose", is_flag=True, default=False)
@click.pass_context
def main(ctx, config_file, retrieval_mode, fixtures_dir, verbose):
    """Interdisciplinary ideation pipeline and evaluation harness."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr)
    ctx.obj = {
        "config_file": config_file,
        "flags": {"retrieval_mode": retrieval_mode, "fixtures_dir": fixtures_dir},
    }


@main.command()
@click.argument("problem_statement")
@click.option("--target-domain", required=True, help="Fine-grained target domain name.")
@click.option("--cutoff-year", type=int, default=None, help="Exclusive upper bound on paper years.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="idea_catalyst")
@click.option("--top-k", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def ideate(ctx, problem_statement, target_domain, cutoff_year, strategy, top_k, out_dir):
    """Run the ideation pipeline on one research problem."""
    settings = _load(ctx, top_k=top_k, out_dir=out_dir)
    try:
        require_generator(settings)
        if strategy != "no_potential_ranking":
            require_judge(settings)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))

    out = Path(settings.out_dir)
    artifact_path = out / "artifact.json"
    report_path = out / "report.md"
    try:
        services = build_services(settings, log_path=str(out / "llm_log.jsonl"))
        from .models import ResearchProblem

        try:
            coarse = services.mapper.map(target_domain)
        except MappingError as exc:
            _fail(EXIT_CONFIG, f"cannot map target domain: {exc}")
        problem = ResearchProblem(
            statement=problem_statement,
            target_domain_fine=target_domain,
            target_domain_coarse=coarse,
            cutoff_year=cutoff_year,
        )
        artifact = run_pipeline(problem, services, strategy=strategy, out_path=artifact_path)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(emit_run_report(artifact), encoding="utf-8")
    except SystemExit:
        raise
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"pipeline failed ({type(exc).__name__}): {exc}")
    click.echo(f"artifact: {artifact_path}")
    click.echo(f"report: {report_path}")


@main.command()
@click.argument("artifact_path", type=click.Path(exists=True))
@click.pass_context
def resume(ctx, artifact_path):
    """Continue a partial run from its first missing checkpoint."""
    settings = _load(ctx)
    path = Path(artifact_path)
    try:
        artifact = canonical_deserialize(path.read_bytes())
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"artifact cannot be loaded: {exc}")
    remaining = missing_stages(artifact)
    if not remaining:
        click.echo("nothing to resume: all stages are checkpointed")
        return
    try:
        require_generator(settings)
        strategy = artifact.config_snapshot.get("strategy", "idea_catalyst")
        if strategy != "no_potential_ranking":
            require_judge(settings)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        services = build_services(settings, log_path=str(path.parent / "llm_log.jsonl"))
        artifact = resume_pipeline(artifact, services, out_path=path)
        report_path = path.parent / "report.md"
        report_path.write_text(emit_run_report(artifact), encoding="utf-8")
    except SystemExit:
        raise
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"resume failed ({type(exc).__name__}): {exc}")
    click.echo(f"resumed stages: {', '.join(remaining)}")
    click.echo(f"artifact: {path}")


@main.command()
@click.option("--arm", type=click.Choice(STRATEGIES), required=True)
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--k", "ks_text", default="1,2,3", help="Comma-separated k values.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def evaluate(ctx, arm, records_path, ks_text, out_dir):
    """Run one evaluation arm over a JSON-lines benchmark file."""
    settings = _load(ctx, out_dir=out_dir)
    try:
        require_generator(settings)
        require_judge(settings)
        ks = tuple(int(part) for part in ks_text.split(",") if part.strip())
        if not ks or any(k < 1 for k in ks):
            raise ConfigError(f"--k must list positive integers, got {ks_text!r}")
    except (ConfigError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(settings.out_dir)
    try:
        services = build_services(settings, log_path=str(out / "llm_log.jsonl"))
        records = load_records(records_path)
        result = run_arm(StrategyConfig(strategy=arm), records, services, out / "records", ks=ks)
        json_path, text_path = write_rate_tables(result, out)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"evaluation failed ({type(exc).__name__}): {exc}")
    click.echo(result.to_text())
    click.echo(f"rate tables: {json_path}, {text_path}")


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def screen(ctx, records_path, out_dir):
    """Advisory judge-assisted leakage screening of a benchmark file.

    Reports records whose problem context appears to reveal the source
    insight; it never alters eligibility (leakage_checked stays authoritative).
    """
    settings = _load(ctx, out_dir=out_dir)
    try:
        require_judge(settings)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(settings.out_dir)
    try:
        from .evaluation import screen_leakage

        services = build_services(settings, log_path=str(out / "llm_log.jsonl"))
        findings = screen_leakage(load_records(records_path), services.gateway)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "leakage_screen.json"
        report_path.write_text(json.dumps(findings, ensure_ascii=False, indent=1), encoding="utf-8")
    except SystemExit:
        raise
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"screening failed ({type(exc).__name__}): {exc}")
    flagged = [f for f in findings if f["leaks"]]
    click.echo(f"screened {len(findings)} records; {len(flagged)} flagged as possible leakage")
    for finding in flagged:
        click.echo(f"  {finding['record_id']}: {finding['reasoning']}")
    click.echo(f"report: {report_path}")


@main.command()
@click.option("--runs", "runs_dir", type=click.Path(exists=True), required=True)
@click.option("--min-count", type=int, default=10, show_default=True)
@click.option("--min-pair-count", type=int, default=10, show_default=True)
@click.option("--top-k", type=int, default=3, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def analyze(ctx, runs_dir, min_count, min_pair_count, top_k, out_dir):
    """Source-domain distribution and flow tables over stored run artifacts."""
    settings = _load(ctx, out_dir=out_dir)
    out = Path(settings.out_dir)
    artifacts = []
    for path in sorted(Path(runs_dir).rglob("*.json")):
        try:
            artifacts.append(canonical_deserialize(path.read_bytes()))
        except Exception:
            continue  # non-artifact JSON files live alongside artifacts
    try:
        stats = domain_distribution(artifacts, top_k=top_k, min_count=min_count)
        flows = flow_table(artifacts, min_pair_count=min_pair_count, top_k=top_k)
        out.mkdir(parents=True, exist_ok=True)
        stats_path = out / "stats.json"
        stats_path.write_text(
            json.dumps(
                {
                    "artifacts": len(artifacts),
                    "counts": dict(stats.counts),
                    "normalized_entropy": stats.normalized_entropy,
                    "filtered_min_count": stats.filtered_min_count,
                    "flows": [list(row) for row in flows],
                },
                ensure_ascii=False,
                indent=1,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        report_path = out / "analysis.md"
        report_path.write_text(emit_stats_report(stats, flows), encoding="utf-8")
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"analysis failed ({type(exc).__name__}): {exc}")
    click.echo(f"analyzed {len(artifacts)} artifacts")
    click.echo(f"stats: {stats_path}")
    click.echo(f"report: {report_path}")


@main.group()
def cache():
    """Inspect or purge the retrieval cache."""


@cache.command("stats")
@click.pass_context
def cache_stats_cmd(ctx):
    settings = _load(ctx)
    stats = cache_stats(settings.cache_dir)
    click.echo(f"entries: {stats['entries']}")
    click.echo(f"bytes: {stats['bytes']}")


@cache.command("purge")
@click.pass_context
def cache_purge_cmd(ctx):
    settings = _load(ctx)
    removed = purge_cache(settings.cache_dir)
    click.echo(f"purged {removed} entries")


@main.group()
def fixtures():
    """Record or verify retrieval fixtures."""


@fixtures.command("record")
@click.option("--requests", "requests_path", type=click.Path(exists=True), required=True,
              help="JSON list of {query, domain, limit?, cutoff_year?}.")
@click.option("--manifest-out", type=click.Path(), default=None)
@click.pass_context
def fixtures_record(ctx, requests_path, manifest_out):
    """Execute listed requests live and store raw exchanges as fixtures."""
    settings = _load(ctx, retrieval_mode="record")
    try:
        specs = json.loads(Path(requests_path).read_text(encoding="utf-8"))
        client = SnippetClient(
            mode="record",
            endpoint=settings.s2_endpoint,
            api_key=settings.s2_api_key,
            fixtures_dir=settings.fixtures_dir,
            rate_per_sec=settings.rate_per_sec,
        )
        fingerprints = []
        for spec_item in specs:
            req = RetrievalRequest(
                query=spec_item["query"],
                domain=CoarseField.from_label(spec_item["domain"]),
                limit=int(spec_item.get("limit", settings.retrieval_limit)),
                cutoff_year=spec_item.get("cutoff_year"),
            )
            client.retrieve(req)
            fingerprints.append(request_fingerprint(req))
        if manifest_out:
            Path(manifest_out).write_text(
                json.dumps({"fingerprints": fingerprints}, indent=1), encoding="utf-8"
            )
    except SystemExit:
        raise
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"recording failed ({type(exc).__name__}): {exc}")
    click.echo(f"recorded {len(fingerprints)} fixtures")


@fixtures.command("verify")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.pass_context
def fixtures_verify(ctx, manifest_path):
    """Check that every fingerprint in a manifest has a readable fixture."""
    settings = _load(ctx)
    if not settings.fixtures_dir:
        _fail(EXIT_CONFIG, "fixtures directory not configured (--fixtures-dir)")
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    missing, broken = verify_fixtures(settings.fixtures_dir, manifest.get("fingerprints", []))
    if missing or broken:
        for fp in missing:
            click.echo(f"missing: {fp}", err=True)
        for fp in broken:
            click.echo(f"unreadable: {fp}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo("all fixtures present")


if __name__ == "__main__":
    main()
