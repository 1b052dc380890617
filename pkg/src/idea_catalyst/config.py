"""Layered configuration: flags > environment > config file > defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

ENV_PREFIX = "IDEA_CATALYST"

GATE_RULE = "keep iff relevant/retrieved > 0.5 (exactly half prunes)"
WINRATE_RULE = "within-record mean over top-k outputs, then mean across records"

DEFAULT_S2_ENDPOINT = "https://api.semanticscholar.org/graph/v1"


class ConfigError(Exception):
    """Configuration is missing or malformed; the offending key is named."""


@dataclass(frozen=True)
class ProfileConfig:
    """One chat-completion profile (generator or judge)."""

    name: str
    endpoint: Optional[str] = None
    model_id: str = ""
    temperature: float = 0.7
    max_output_tokens: int = 2048
    api_key: Optional[str] = None
    no_thinking: bool = False


@dataclass(frozen=True)
class Settings:
    # retrieval
    retrieval_mode: str = "live"
    fixtures_dir: Optional[str] = None
    cache_dir: str = ".idea_catalyst_cache"
    s2_endpoint: str = DEFAULT_S2_ENDPOINT
    s2_api_key: Optional[str] = None
    retrieval_limit: int = 20
    rate_per_sec: float = 1.0
    # model profiles
    generator: ProfileConfig = field(
        default_factory=lambda: ProfileConfig(name="generator", temperature=0.7, no_thinking=True)
    )
    judge: ProfileConfig = field(
        default_factory=lambda: ProfileConfig(name="judge", temperature=0.0)
    )
    # pipeline knobs
    min_questions: int = 3
    max_questions: int = 5
    max_queries: int = 3
    max_challenges: int = 3
    max_source_domains: int = 5
    fragment_cap: int = 12
    top_k: int = 3
    attempt_budget: int = 3
    in_flight_cap: int = 4
    # output
    out_dir: str = "out"

    def profile(self, name: str) -> ProfileConfig:
        if name == "generator":
            return self.generator
        if name == "judge":
            return self.judge
        raise ConfigError(f"unknown model profile: {name}")


_MODES = ("live", "replay", "record")


def _as_int(value: Any, key: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _as_float(value: Any, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _as_bool(value: Any, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on"):
        return True
    if isinstance(value, str) and value.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _profile_from_sources(
    name: str, base: ProfileConfig, file_cfg: Mapping[str, Any], env: Mapping[str, str]
) -> ProfileConfig:
    prefix = f"{ENV_PREFIX}_{'GEN' if name == 'generator' else 'JUDGE'}"
    profile = base
    if "endpoint" in file_cfg:
        profile = replace(profile, endpoint=file_cfg["endpoint"])
    if "model" in file_cfg:
        profile = replace(profile, model_id=str(file_cfg["model"]))
    if "temperature" in file_cfg:
        profile = replace(profile, temperature=_as_float(file_cfg["temperature"], f"llm.{name}.temperature"))
    if "max_output_tokens" in file_cfg:
        profile = replace(
            profile, max_output_tokens=_as_int(file_cfg["max_output_tokens"], f"llm.{name}.max_output_tokens")
        )
    if "api_key" in file_cfg:
        profile = replace(profile, api_key=file_cfg["api_key"])
    if "no_thinking" in file_cfg:
        profile = replace(profile, no_thinking=_as_bool(file_cfg["no_thinking"], f"llm.{name}.no_thinking"))

    if f"{prefix}_ENDPOINT" in env:
        profile = replace(profile, endpoint=env[f"{prefix}_ENDPOINT"])
    if f"{prefix}_MODEL" in env:
        profile = replace(profile, model_id=env[f"{prefix}_MODEL"])
    if f"{prefix}_API_KEY" in env:
        profile = replace(profile, api_key=env[f"{prefix}_API_KEY"])
    if f"{prefix}_TEMPERATURE" in env:
        profile = replace(profile, temperature=_as_float(env[f"{prefix}_TEMPERATURE"], f"{prefix}_TEMPERATURE"))
    if f"{prefix}_MAX_TOKENS" in env:
        profile = replace(profile, max_output_tokens=_as_int(env[f"{prefix}_MAX_TOKENS"], f"{prefix}_MAX_TOKENS"))
    if f"{prefix}_NO_THINKING" in env:
        profile = replace(profile, no_thinking=_as_bool(env[f"{prefix}_NO_THINKING"], f"{prefix}_NO_THINKING"))
    return profile


def load_settings(
    config_file: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
    flags: Optional[Mapping[str, Any]] = None,
) -> Settings:
    """Resolve effective settings with precedence flags > env > file > defaults."""
    env = dict(env if env is not None else os.environ)
    flags = dict(flags or {})

    file_cfg: dict[str, Any] = {}
    if config_file:
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"config file not found: {config_file}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must be a key/value tree")
        file_cfg = loaded

    retrieval = file_cfg.get("retrieval", {}) or {}
    llm = file_cfg.get("llm", {}) or {}
    pipeline = file_cfg.get("pipeline", {}) or {}
    output = file_cfg.get("output", {}) or {}

    settings = Settings()
    if "mode" in retrieval:
        settings = replace(settings, retrieval_mode=str(retrieval["mode"]))
    if "fixtures_dir" in retrieval:
        settings = replace(settings, fixtures_dir=str(retrieval["fixtures_dir"]))
    if "cache_dir" in retrieval:
        settings = replace(settings, cache_dir=str(retrieval["cache_dir"]))
    if "endpoint" in retrieval:
        settings = replace(settings, s2_endpoint=str(retrieval["endpoint"]))
    if "limit" in retrieval:
        settings = replace(settings, retrieval_limit=_as_int(retrieval["limit"], "retrieval.limit"))
    if "rate_per_sec" in retrieval:
        settings = replace(settings, rate_per_sec=_as_float(retrieval["rate_per_sec"], "retrieval.rate_per_sec"))

    settings = replace(
        settings,
        generator=_profile_from_sources("generator", settings.generator, llm.get("generator", {}) or {}, env),
        judge=_profile_from_sources("judge", settings.judge, llm.get("judge", {}) or {}, env),
    )

    int_knobs = (
        "min_questions",
        "max_questions",
        "max_queries",
        "max_challenges",
        "max_source_domains",
        "fragment_cap",
        "top_k",
        "attempt_budget",
        "in_flight_cap",
    )
    for knob in int_knobs:
        if knob in pipeline:
            settings = replace(settings, **{knob: _as_int(pipeline[knob], f"pipeline.{knob}")})
    if "dir" in output:
        settings = replace(settings, out_dir=str(output["dir"]))

    if f"{ENV_PREFIX}_S2_KEY" in env:
        settings = replace(settings, s2_api_key=env[f"{ENV_PREFIX}_S2_KEY"])
    if f"{ENV_PREFIX}_S2_ENDPOINT" in env:
        settings = replace(settings, s2_endpoint=env[f"{ENV_PREFIX}_S2_ENDPOINT"])

    for key, value in flags.items():
        if value is None:
            continue
        if not hasattr(settings, key):
            raise ConfigError(f"unknown setting: {key}")
        settings = replace(settings, **{key: value})

    if settings.retrieval_mode not in _MODES:
        raise ConfigError(f"retrieval mode must be one of {_MODES}, got {settings.retrieval_mode!r}")
    if not 1 <= settings.retrieval_limit <= 20:
        raise ConfigError(f"retrieval.limit must be in [1, 20], got {settings.retrieval_limit}")
    if settings.retrieval_mode in ("replay", "record") and not settings.fixtures_dir:
        raise ConfigError(f"retrieval mode {settings.retrieval_mode!r} requires fixtures_dir (--fixtures-dir)")
    return settings


def require_generator(settings: Settings) -> None:
    if not settings.generator.endpoint:
        raise ConfigError(
            "generator endpoint not configured: set IDEA_CATALYST_GEN_ENDPOINT or llm.generator.endpoint"
        )


def require_judge(settings: Settings) -> None:
    if not settings.judge.endpoint:
        raise ConfigError(
            "judge endpoint not configured: set IDEA_CATALYST_JUDGE_ENDPOINT or llm.judge.endpoint"
        )


def config_snapshot(settings: Settings, strategy: str, prompt_hashes: Mapping[str, str]) -> dict[str, Any]:
    """The effective configuration embedded in every run artifact."""
    return {
        "strategy": strategy,
        "retrieval_mode": settings.retrieval_mode,
        "fixtures_dir": settings.fixtures_dir,
        "retrieval_limit": settings.retrieval_limit,
        "rate_per_sec": settings.rate_per_sec,
        "generator_model": settings.generator.model_id,
        "generator_temperature": settings.generator.temperature,
        "generator_no_thinking": settings.generator.no_thinking,
        "judge_model": settings.judge.model_id,
        "judge_temperature": settings.judge.temperature,
        "min_questions": settings.min_questions,
        "max_questions": settings.max_questions,
        "max_queries": settings.max_queries,
        "max_challenges": settings.max_challenges,
        "max_source_domains": settings.max_source_domains,
        "fragment_cap": settings.fragment_cap,
        "top_k": settings.top_k,
        "attempt_budget": settings.attempt_budget,
        "gate_rule": GATE_RULE,
        "winrate_rule": WINRATE_RULE,
        "prompt_hashes": dict(prompt_hashes),
    }
