"""Scholarly snippet retrieval: live client, disk cache, record/replay fixtures.

The snippet service is treated as a black box: it returns relevance-ranked
passages per query within one coarse field. This module enforces the paper
limit, the year cutoff, abstract fallback for degenerate snippets, and a
token-bucket rate limit on live egress.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import httpx

from .fields import CoarseField
from .models import PaperSnippet, SourceKind

ENDPOINT_VERSION = "s2-graph-v1"
MAX_LIMIT = 20


class RetrievalError(Exception):
    """Transport failure after retries."""


class FixtureMissError(Exception):
    """Replay mode has no fixture for the request fingerprint."""


@dataclass(frozen=True)
class RetrievalRequest:
    query: str
    domain: CoarseField
    limit: int = MAX_LIMIT
    cutoff_year: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        if not 1 <= self.limit <= MAX_LIMIT:
            raise ValueError(f"limit must be in [1, {MAX_LIMIT}]")


def request_fingerprint(req: RetrievalRequest) -> str:
    payload = json.dumps(
        {
            "endpoint_version": ENDPOINT_VERSION,
            "query": req.query,
            "domain": req.domain.value,
            "limit": req.limit,
            "cutoff_year": req.cutoff_year,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class RateLimiter:
    """Serializes live egress to at most rate_per_sec requests per second."""

    def __init__(self, rate_per_sec: float, timer=time.monotonic, sleep=time.sleep):
        self._interval = 1.0 / rate_per_sec if rate_per_sec > 0 else 0.0
        self._timer = timer
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0
        self.granted_at: list[float] = []

    def acquire(self) -> None:
        with self._lock:
            now = self._timer()
            start = max(now, self._next_slot)
            self._next_slot = start + self._interval
            delay = start - now
            self.granted_at.append(start)
        if delay > 0:
            self._sleep(delay)


def _norm_text(text: str) -> str:
    return " ".join((text or "").lower().split())


def _paper_id_of(paper: Mapping[str, Any]) -> Optional[str]:
    pid = paper.get("paperId") or paper.get("corpusId")
    return str(pid) if pid is not None else None


def postprocess_snippets(
    req: RetrievalRequest,
    payload: Mapping[str, Any],
    fetch_details: Callable[[str], Optional[Mapping[str, Any]]],
) -> list[PaperSnippet]:
    """Turn one raw snippet-search payload into the contracted snippet list.

    Multiple snippets of one paper are aggregated (blank-line joined, service
    order). Degenerate snippet text (absent or equal to the title) falls back
    to the paper abstract; papers without a usable text are dropped. When a
    cutoff year is set, papers with year >= cutoff or unknown year are dropped.
    Result keeps service (relevance) order, ties broken by paper_id, truncated
    to the requested paper limit.
    """
    grouped: dict[str, dict[str, Any]] = {}
    order: list[str] = []
    for index, item in enumerate(payload.get("data", []) or []):
        paper = item.get("paper") or {}
        pid = _paper_id_of(paper)
        if pid is None:
            continue
        snippet = item.get("snippet") or {}
        text = (snippet.get("text") or "").strip()
        entry = grouped.get(pid)
        if entry is None:
            entry = {
                "texts": [],
                "title": paper.get("title") or "",
                "year": paper.get("year"),
                "score": item.get("score"),
                "index": index,
            }
            grouped[pid] = entry
            order.append(pid)
        if text:
            entry["texts"].append(text)
        if entry["year"] is None and paper.get("year") is not None:
            entry["year"] = paper.get("year")

    scores = [grouped[pid]["score"] for pid in order]
    if order and all(s is not None for s in scores):
        order.sort(key=lambda pid: (-float(grouped[pid]["score"]), pid))

    results: list[PaperSnippet] = []
    for pid in order:
        if len(results) >= req.limit:
            break
        entry = grouped[pid]
        title = entry["title"]
        year = entry["year"]
        text = "\n\n".join(entry["texts"])
        degenerate = not text.strip() or _norm_text(text) == _norm_text(title)
        needs_details = degenerate or (req.cutoff_year is not None and year is None)
        kind = SourceKind.SNIPPET
        if needs_details:
            details = fetch_details(pid) or {}
            if year is None:
                year = details.get("year")
            if degenerate:
                abstract = (details.get("abstract") or "").strip()
                if not abstract or _norm_text(abstract) == _norm_text(title):
                    continue
                text = abstract
                kind = SourceKind.ABSTRACT_FALLBACK
        if req.cutoff_year is not None:
            if year is None or year >= req.cutoff_year:
                continue
        results.append(
            PaperSnippet(
                paper_id=pid,
                title=title,
                year=year,
                snippet_text=text,
                source_kind=kind,
                query=req.query,
                domain=req.domain,
            )
        )
    return results


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.rename(path)


class SnippetClient:
    """Mode-aware retrieval front end.

    live   — disk cache, then the HTTP service (rate limited).
    record — HTTP service; raw exchanges written as fixtures, then post-processed.
    replay — fixtures only; a missing fixture is an error, never a live call.
    """

    def __init__(
        self,
        mode: str = "live",
        endpoint: str = "https://api.semanticscholar.org/graph/v1",
        api_key: Optional[str] = None,
        fixtures_dir: Optional[str] = None,
        cache_dir: Optional[str] = None,
        rate_per_sec: float = 1.0,
        transport: Optional[httpx.BaseTransport] = None,
        sleep=time.sleep,
        timer=time.monotonic,
        clock=None,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown retrieval mode: {mode}")
        if mode in ("record", "replay") and not fixtures_dir:
            raise ValueError(f"mode {mode!r} requires fixtures_dir")
        self.mode = mode
        self._endpoint = endpoint.rstrip("/")
        self._api_key = api_key
        self._fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self._cache_dir = Path(cache_dir) if cache_dir else None
        self._limiter = RateLimiter(rate_per_sec, timer=timer, sleep=sleep)
        self._client = httpx.Client(transport=transport, timeout=30.0)
        self._sleep = sleep
        self._clock = clock or (lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))

    # -- HTTP ---------------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        return {"x-api-key": self._api_key} if self._api_key else {}

    def _get(self, url: str, params: Optional[Mapping[str, Any]] = None) -> Mapping[str, Any]:
        delay = 1.0
        last_error: Optional[Exception] = None
        for attempt in range(3):
            self._limiter.acquire()
            try:
                resp = self._client.get(url, params=params, headers=self._headers())
                if resp.status_code in (429, 503):
                    retry_after = resp.headers.get("Retry-After")
                    self._sleep(float(retry_after) if retry_after else delay)
                    delay *= 2
                    last_error = RetrievalError(f"service back-pressure: HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt < 2:
                    self._sleep(delay)
                    delay *= 2
        raise RetrievalError(f"retrieval failed after 3 attempts: {last_error}")

    def _search_snippets(self, req: RetrievalRequest) -> Mapping[str, Any]:
        params: dict[str, Any] = {
            "query": req.query,
            "limit": req.limit,
            "fieldsOfStudy": req.domain.value,
        }
        if req.cutoff_year is not None:
            params["publicationDateOrYear"] = f":{req.cutoff_year - 1}"
        return self._get(f"{self._endpoint}/snippet/search", params)

    def _fetch_details_live(self, paper_id: str) -> Optional[Mapping[str, Any]]:
        try:
            return self._get(f"{self._endpoint}/paper/{paper_id}", {"fields": "title,abstract,year"})
        except RetrievalError:
            return None

    # -- cache ---------------------------------------------------------------

    def _cache_path(self, fingerprint: str) -> Optional[Path]:
        return self._cache_dir / f"{fingerprint}.json" if self._cache_dir else None

    def _cache_read(self, fingerprint: str) -> Optional[list[PaperSnippet]]:
        path = self._cache_path(fingerprint)
        if path is None or not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return [
            PaperSnippet(
                paper_id=s["paper_id"],
                title=s["title"],
                year=s["year"],
                snippet_text=s["snippet_text"],
                source_kind=SourceKind(s["source_kind"]),
                query=s["query"],
                domain=CoarseField(s["domain"]),
            )
            for s in entry["response"]
        ]

    def _cache_write(self, fingerprint: str, snippets: list[PaperSnippet]) -> None:
        path = self._cache_path(fingerprint)
        if path is None:
            return
        entry = {
            "fingerprint": fingerprint,
            "fetched_at": self._clock(),
            "response": [
                {
                    "paper_id": s.paper_id,
                    "title": s.title,
                    "year": s.year,
                    "snippet_text": s.snippet_text,
                    "source_kind": s.source_kind.value,
                    "query": s.query,
                    "domain": s.domain.value,
                }
                for s in snippets
            ],
        }
        _atomic_write(path, json.dumps(entry, ensure_ascii=False, indent=1))

    # -- fixtures ------------------------------------------------------------

    def _fixture_path(self, fingerprint: str) -> Path:
        assert self._fixtures_dir is not None
        return self._fixtures_dir / f"{fingerprint}.json"

    def record_fixture(self, req: RetrievalRequest) -> list[PaperSnippet]:
        """Fetch live, persist the raw exchange, and return the processed result."""
        payload = self._search_snippets(req)
        details: dict[str, Any] = {}

        def fetch(pid: str) -> Optional[Mapping[str, Any]]:
            got = self._fetch_details_live(pid)
            details[pid] = got
            return got

        snippets = postprocess_snippets(req, payload, fetch)
        fixture = {
            "fingerprint": request_fingerprint(req),
            "request": {
                "query": req.query,
                "domain": req.domain.value,
                "limit": req.limit,
                "cutoff_year": req.cutoff_year,
            },
            "snippet_response": payload,
            "paper_details": details,
        }
        _atomic_write(self._fixture_path(fixture["fingerprint"]), json.dumps(fixture, ensure_ascii=False, indent=1))
        return snippets

    def replay_fixture(self, req: RetrievalRequest) -> list[PaperSnippet]:
        """Reprocess a recorded raw exchange; byte-equal inputs give equal outputs."""
        fingerprint = request_fingerprint(req)
        path = self._fixture_path(fingerprint)
        if not path.exists():
            raise FixtureMissError(
                f"no fixture for fingerprint {fingerprint} (query={req.query!r}, domain={req.domain.value!r})"
            )
        fixture = json.loads(path.read_text(encoding="utf-8"))
        details = fixture.get("paper_details", {})
        return postprocess_snippets(req, fixture["snippet_response"], lambda pid: details.get(pid))

    # -- entry point -----------------------------------------------------------

    def retrieve(self, req: RetrievalRequest) -> list[PaperSnippet]:
        if self.mode == "replay":
            return self.replay_fixture(req)
        if self.mode == "record":
            return self.record_fixture(req)
        fingerprint = request_fingerprint(req)
        cached = self._cache_read(fingerprint)
        if cached is not None:
            return cached
        payload = self._search_snippets(req)
        snippets = postprocess_snippets(req, payload, self._fetch_details_live)
        self._cache_write(fingerprint, snippets)
        return snippets


# ---------------------------------------------------------------------------
# Cache and fixture tooling (CLI backing)


def cache_stats(cache_dir: str) -> dict[str, int]:
    path = Path(cache_dir)
    files = list(path.glob("*.json")) if path.exists() else []
    return {"entries": len(files), "bytes": sum(f.stat().st_size for f in files)}


def purge_cache(cache_dir: str) -> int:
    path = Path(cache_dir)
    if not path.exists():
        return 0
    removed = 0
    for f in path.glob("*.json"):
        f.unlink()
        removed += 1
    return removed


def verify_fixtures(fixtures_dir: str, fingerprints: list[str]) -> tuple[list[str], list[str]]:
    """Return (missing, unreadable) fixture fingerprints from an expected list."""
    base = Path(fixtures_dir)
    missing, broken = [], []
    for fp in fingerprints:
        path = base / f"{fp}.json"
        if not path.exists():
            missing.append(fp)
            continue
        try:
            fixture = json.loads(path.read_text(encoding="utf-8"))
            if fixture.get("fingerprint") != fp or "snippet_response" not in fixture:
                broken.append(fp)
        except (json.JSONDecodeError, OSError):
            broken.append(fp)
    return missing, broken
