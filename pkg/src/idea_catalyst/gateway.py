"""Provider-agnostic chat-completion access with structured-output enforcement.

Two model profiles (generator, judge) share one gateway. Every call renders a
versioned prompt template, sends it, parses the reply against a named schema,
and re-prompts with the validation error on failure until the attempt budget
is spent. All attempts are logged as JSON lines.
"""

from __future__ import annotations

import hashlib
import json
import re
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import httpx

from .config import ProfileConfig
from .schemas import SCHEMAS, SchemaViolation

PROMPT_DIR = Path(__file__).parent / "prompts"


class GatewayError(Exception):
    """Transport-level failure talking to a model endpoint."""


class PromptError(Exception):
    """Unknown template or unbound placeholder."""


class StructuredOutputError(Exception):
    """The model never produced schema-valid output within the budget."""

    def __init__(self, message: str, last_raw: str = ""):
        super().__init__(message)
        self.last_raw = last_raw


class LLMFixtureMissError(Exception):
    """Replay mode found no recorded response for a request fingerprint."""


# ---------------------------------------------------------------------------
# Prompt templates


def _template_path(template_id: str) -> Path:
    return PROMPT_DIR / f"{template_id}.txt"


def load_template(template_id: str) -> str:
    path = _template_path(template_id)
    if not path.exists():
        raise PromptError(f"unknown template: {template_id}")
    return path.read_text(encoding="utf-8")


def template_placeholders(template: str) -> set[str]:
    names = set()
    for _literal, field_name, _spec, _conv in string.Formatter().parse(template):
        if field_name:
            names.add(field_name)
    return names


def render_prompt(template_id: str, bindings: Mapping[str, Any]) -> str:
    """Deterministically substitute bindings into a template.

    An unbound placeholder raises PromptError naming it; extra bindings are
    permitted and ignored.
    """
    template = load_template(template_id)
    needed = template_placeholders(template)
    missing = sorted(needed - set(bindings))
    if missing:
        raise PromptError(f"unbound placeholder(s) in template {template_id!r}: {', '.join(missing)}")
    return template.format(**{k: str(v) for k, v in bindings.items()})


def prompt_hashes() -> dict[str, str]:
    """sha256 per bundled template, pinned into every config snapshot."""
    out = {}
    for path in sorted(PROMPT_DIR.glob("*.txt")):
        out[path.stem] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


# ---------------------------------------------------------------------------
# Requests and parsing


@dataclass(frozen=True)
class StructuredRequest:
    profile: ProfileConfig
    template_id: str
    prompt: str
    schema_name: str
    attempt_budget: int = 3
    bindings: Mapping[str, Any] = field(default_factory=dict)
    context: Mapping[str, Any] = field(default_factory=dict)
    temperature: Optional[float] = None

    def __post_init__(self) -> None:
        if self.attempt_budget < 1:
            raise ValueError("attempt_budget must be >= 1")
        if self.schema_name not in SCHEMAS:
            raise ValueError(f"unknown schema: {self.schema_name}")

    @property
    def effective_temperature(self) -> float:
        return self.profile.temperature if self.temperature is None else self.temperature


def build_request(
    profile: ProfileConfig,
    template_id: str,
    bindings: Mapping[str, Any],
    schema_name: str,
    attempt_budget: int = 3,
    context: Optional[Mapping[str, Any]] = None,
    temperature: Optional[float] = None,
) -> StructuredRequest:
    return StructuredRequest(
        profile=profile,
        template_id=template_id,
        prompt=render_prompt(template_id, bindings),
        schema_name=schema_name,
        attempt_budget=attempt_budget,
        bindings=dict(bindings),
        context=dict(context or {}),
        temperature=temperature,
    )


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(raw: str) -> Any:
    """Parse a model reply as JSON, tolerating markdown fences and stray prose."""
    text = raw.strip()
    fenced = _FENCE_RE.search(text)
    if fenced:
        text = fenced.group(1).strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start != -1 and end > start:
            return json.loads(text[start : end + 1])
        raise


# ---------------------------------------------------------------------------
# Backends


class HttpChatBackend:
    """OpenAI-compatible chat-completion endpoint."""

    def __init__(self, transport: Optional[httpx.BaseTransport] = None, sleep=time.sleep, max_attempts: int = 3):
        self._client = httpx.Client(transport=transport, timeout=120.0)
        self._sleep = sleep
        self._max_attempts = max_attempts

    def complete(self, request: StructuredRequest, prompt: str) -> str:
        profile = request.profile
        url = profile.endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url = url + "/chat/completions"
        body: dict[str, Any] = {
            "model": profile.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.effective_temperature,
            "max_tokens": profile.max_output_tokens,
        }
        if profile.no_thinking:
            # Reasoning suppression where the server supports it; ignored otherwise.
            body["chat_template_kwargs"] = {"enable_thinking": False}
        headers = {}
        if profile.api_key:
            headers["Authorization"] = f"Bearer {profile.api_key}"
        delay = 1.0
        last_error: Optional[Exception] = None
        for attempt in range(self._max_attempts):
            try:
                resp = self._client.post(url, json=body, headers=headers)
                if resp.status_code in (429, 503):
                    retry_after = resp.headers.get("Retry-After")
                    self._sleep(float(retry_after) if retry_after else delay)
                    delay *= 2
                    last_error = GatewayError(f"endpoint back-pressure: HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.TransportError, httpx.HTTPStatusError, KeyError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt < self._max_attempts - 1:
                    self._sleep(delay)
                    delay *= 2
        raise GatewayError(f"chat endpoint failed after {self._max_attempts} attempts: {last_error}")


class MockBackend:
    """Deterministic in-process model, selected by mock:// endpoints."""

    def complete(self, request: StructuredRequest, prompt: str) -> str:
        from .mock_llm import respond

        return respond(request, prompt)


def llm_fingerprint(request: StructuredRequest, prompt: str) -> str:
    payload = json.dumps(
        {
            "profile": request.profile.name,
            "model": request.profile.model_id,
            "temperature": request.effective_temperature,
            "schema": request.schema_name,
            "prompt": prompt,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayLLMBackend:
    def __init__(self, fixtures_dir: Path):
        self._dir = Path(fixtures_dir) / "llm"

    def complete(self, request: StructuredRequest, prompt: str) -> str:
        fp = llm_fingerprint(request, prompt)
        path = self._dir / f"{fp}.json"
        if not path.exists():
            raise LLMFixtureMissError(f"no recorded model response for fingerprint {fp}")
        return json.loads(path.read_text(encoding="utf-8"))["response"]


class RecordingLLMBackend:
    def __init__(self, inner, fixtures_dir: Path):
        self._inner = inner
        self._dir = Path(fixtures_dir) / "llm"

    def complete(self, request: StructuredRequest, prompt: str) -> str:
        raw = self._inner.complete(request, prompt)
        fp = llm_fingerprint(request, prompt)
        self._dir.mkdir(parents=True, exist_ok=True)
        payload = {"fingerprint": fp, "profile": request.profile.name, "prompt": prompt, "response": raw}
        tmp = self._dir / f"{fp}.json.tmp"
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")
        tmp.rename(self._dir / f"{fp}.json")
        return raw


_REPAIR_SUFFIX = """

Your previous response was not valid:
{error}

Previous response:
{raw}

Return a corrected response. Return only the JSON object, with no surrounding text.
"""


class LLMGateway:
    """Schema-enforced structured completion over pluggable backends."""

    def __init__(
        self,
        profiles: Mapping[str, ProfileConfig],
        mode: str = "live",
        fixtures_dir: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        log_path: Optional[str] = None,
        sleep=time.sleep,
        clock=None,
        in_flight_cap: int = 4,
        attempt_budget: int = 3,
    ):
        self._profiles = dict(profiles)
        self._mode = mode
        self._fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self._transport = transport
        self._sleep = sleep
        self._clock = clock or (lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
        self.attempt_budget = attempt_budget
        self._log_path = Path(log_path) if log_path else None
        self._log_lock = threading.Lock()
        self._semaphores = {name: threading.BoundedSemaphore(in_flight_cap) for name in self._profiles}
        self._backends: dict[str, Any] = {}

    def profile(self, name: str) -> ProfileConfig:
        try:
            return self._profiles[name]
        except KeyError:
            raise GatewayError(f"unknown model profile: {name}") from None

    def set_log_path(self, path: Optional[str]) -> None:
        self._log_path = Path(path) if path else None

    def _backend_for(self, profile: ProfileConfig):
        if profile.name in self._backends:
            return self._backends[profile.name]
        if not profile.endpoint:
            raise GatewayError(f"profile {profile.name!r} has no endpoint configured")
        if profile.endpoint.startswith("mock://"):
            backend: Any = MockBackend()
        else:
            backend = HttpChatBackend(transport=self._transport, sleep=self._sleep)
            if self._mode == "replay":
                if self._fixtures_dir is None:
                    raise GatewayError("replay mode requires a fixtures directory")
                backend = ReplayLLMBackend(self._fixtures_dir)
            elif self._mode == "record":
                if self._fixtures_dir is None:
                    raise GatewayError("record mode requires a fixtures directory")
                backend = RecordingLLMBackend(backend, self._fixtures_dir)
        self._backends[profile.name] = backend
        return backend

    def _log(self, entry: Mapping[str, Any]) -> None:
        if self._log_path is None:
            return
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._log_lock:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)
            with self._log_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def complete_structured(self, request: StructuredRequest) -> Any:
        """Return the parsed, schema-valid object for a structured request.

        On parse or validation failure, up to attempt_budget - 1 repair rounds
        re-prompt with the error appended.
        """
        schema = SCHEMAS[request.schema_name]
        backend = self._backend_for(request.profile)
        semaphore = self._semaphores.get(request.profile.name)
        prompt = request.prompt
        last_raw = ""
        last_error = ""
        for attempt in range(request.attempt_budget):
            if semaphore:
                semaphore.acquire()
            try:
                raw = backend.complete(request, prompt)
            finally:
                if semaphore:
                    semaphore.release()
            last_raw = raw
            try:
                parsed = extract_json(raw)
                schema.validate(parsed, request.context)
            except (json.JSONDecodeError, SchemaViolation, ValueError) as exc:
                last_error = str(exc)
                self._log_attempt(request, prompt, raw, attempt, f"invalid: {last_error}")
                prompt = request.prompt + _REPAIR_SUFFIX.format(error=last_error, raw=raw)
                continue
            self._log_attempt(request, prompt, raw, attempt, "ok")
            return parsed
        raise StructuredOutputError(
            f"schema {request.schema_name!r} not satisfied after {request.attempt_budget} attempts: {last_error}",
            last_raw=last_raw,
        )

    def _log_attempt(self, request: StructuredRequest, prompt: str, raw: str, attempt: int, outcome: str) -> None:
        self._log(
            {
                "ts": self._clock(),
                "profile": request.profile.name,
                "model": request.profile.model_id,
                "template": request.template_id,
                "schema": request.schema_name,
                "temperature": request.effective_temperature,
                "attempt": attempt,
                "prompt": prompt,
                "response": raw,
                "outcome": outcome,
            }
        )

    def call(
        self,
        profile_name: str,
        template_id: str,
        bindings: Mapping[str, Any],
        schema_name: str,
        context: Optional[Mapping[str, Any]] = None,
        temperature: Optional[float] = None,
    ) -> Any:
        """Render + complete in one step; the usual entry point for stages."""
        request = build_request(
            self.profile(profile_name),
            template_id,
            bindings,
            schema_name,
            attempt_budget=self.attempt_budget,
            context=context,
            temperature=temperature,
        )
        return self.complete_structured(request)
