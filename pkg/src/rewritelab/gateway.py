"""Gateway to chat-completion models: live, replayed, or synthetic.

All model traffic in the package flows through `Gateway.chat`, which applies
rate limiting, consults the replay cache, and keeps per-purpose call
counters. Requests are keyed by a content hash so identical requests always
map to the same cache line, independent of field order or platform.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import requests

from .errors import (
    CacheMissError,
    ConfigurationError,
    ContractError,
    ProtocolError,
    TransportError,
)

PURPOSES = ("tagger", "rewriter", "answerer", "judge")

RETRY_BASE_DELAY = 1.0
RETRY_FACTOR = 2.0
RETRY_MAX_ATTEMPTS = 5
RETRY_JITTER_LOW = 0.8
RETRY_JITTER_HIGH = 1.2


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion request.

    `purpose` routes the request to the right model id and lets the
    synthetic backend decide which pipeline stage is calling.
    """

    model: str
    messages: tuple[Mapping[str, str], ...]
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int | None = None
    structured: bool = False
    purpose: str = "answerer"

    def __post_init__(self) -> None:
        if not self.model:
            raise ContractError("model id must be nonempty")
        if not self.messages:
            raise ContractError("messages must be nonempty")
        for msg in self.messages:
            if "role" not in msg or "content" not in msg:
                raise ContractError("each message needs 'role' and 'content'")
        if not 0.0 <= self.temperature <= 2.0:
            raise ContractError(f"temperature must lie in [0, 2], got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ContractError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ContractError("max_tokens must be positive when set")
        if self.purpose not in PURPOSES:
            raise ContractError(f"purpose must be one of {PURPOSES}, got {self.purpose!r}")
        object.__setattr__(self, "messages", tuple(dict(m) for m in self.messages))
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "top_p", float(self.top_p))

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "structured": self.structured,
            "purpose": self.purpose,
        }


@dataclass(frozen=True)
class ChatResponse:
    """Completion text plus minimal accounting."""

    content: str
    finish_reason: str = "stop"
    usage: Mapping[str, int] = field(default_factory=dict)
    latency_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "content": self.content,
            "finish_reason": self.finish_reason,
            "usage": dict(self.usage),
            "latency_s": self.latency_s,
        }


def cache_key(request: ChatRequest) -> str:
    """Stable content hash of the fields that determine a completion.

    Purpose and max_tokens are deliberately excluded: they do not change
    what the model is asked.
    """
    payload = {
        "model": request.model,
        "messages": [dict(m) for m in request.messages],
        "temperature": request.temperature,
        "top_p": request.top_p,
        "structured": request.structured,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RateLimiter:
    """Bounds in-flight requests and requests per sliding minute.

    The clock and sleep hooks exist for simulated-time tests; production use
    leaves them at their defaults.
    """

    def __init__(
        self,
        max_concurrent: int = 4,
        max_per_minute: int = 60,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_concurrent < 1 or max_per_minute < 1:
            raise ConfigurationError("rate limits must be positive")
        self.max_concurrent = max_concurrent
        self.max_per_minute = max_per_minute
        self._clock = clock
        self._sleep = sleep
        self._semaphore = threading.BoundedSemaphore(max_concurrent)
        self._lock = threading.Lock()
        self._starts: deque[float] = deque()

    def _reserve_slot(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._starts and now - self._starts[0] >= 60.0:
                    self._starts.popleft()
                if len(self._starts) < self.max_per_minute:
                    self._starts.append(now)
                    return
                wait = 60.0 - (now - self._starts[0])
            self._sleep(max(wait, 0.0))

    def __enter__(self) -> "RateLimiter":
        self._semaphore.acquire()
        try:
            self._reserve_slot()
        except BaseException:
            self._semaphore.release()
            raise
        return self

    def __exit__(self, *exc_info) -> None:
        self._semaphore.release()


class ReplayCache:
    """JSONL-backed request/response store keyed by content hash."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path) as handle:
                for lineno, line in enumerate(handle, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError:
                        raise ProtocolError(f"corrupt cache line {lineno} in {self.path}")
                    self._entries[record["key"]] = record

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key: str) -> ChatResponse | None:
        with self._lock:
            record = self._entries.get(key)
        if record is None:
            return None
        payload = record["response"]
        return ChatResponse(
            content=payload["content"],
            finish_reason=payload.get("finish_reason", "stop"),
            usage=payload.get("usage", {}),
            latency_s=payload.get("latency_s", 0.0),
        )

    def store(self, key: str, request: ChatRequest, response: ChatResponse) -> None:
        record = {
            "key": key,
            "request": request.as_dict(),
            "response": response.as_dict(),
            "timestamp": time.time(),
        }
        with self._lock:
            self._entries[key] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as handle:
                handle.write(json.dumps(record, sort_keys=True) + "\n")


class LiveBackend:
    """OpenAI-compatible chat-completions endpoint with retry/backoff.

    Retries 429 and 5xx responses and network-level failures with delays of
    base * factor^i scaled by uniform jitter in [0.8, 1.2], up to 5 attempts,
    then raises a transport error. Other 4xx responses fail immediately.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout_s: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
        jitter_rng: np.random.Generator | None = None,
        session: requests.Session | None = None,
    ) -> None:
        if not endpoint:
            raise ConfigurationError("live backend needs an endpoint URL")
        key = os.environ.get(api_key_env)
        if not key:
            raise ConfigurationError(f"environment variable {api_key_env} is not set")
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._sleep = sleep
        self._jitter = jitter_rng if jitter_rng is not None else np.random.default_rng()
        self._session = session if session is not None else requests.Session()
        self._session.headers.update({"Authorization": f"Bearer {key}"})

    def chat(self, request: ChatRequest) -> ChatResponse:
        body: dict = {
            "model": request.model,
            "messages": [dict(m) for m in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        if request.structured:
            body["response_format"] = {"type": "json_object"}
        url = f"{self.endpoint}/chat/completions"
        last_error = "exhausted retries"
        for attempt in range(RETRY_MAX_ATTEMPTS):
            try:
                started = time.monotonic()
                http = self._session.post(url, json=body, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = f"network failure: {exc}"
            else:
                if http.status_code == 200:
                    return self._parse(http.json(), time.monotonic() - started)
                if http.status_code == 429 or http.status_code >= 500:
                    last_error = f"HTTP {http.status_code}"
                else:
                    raise ProtocolError(f"HTTP {http.status_code}: {http.text[:300]}")
            if attempt < RETRY_MAX_ATTEMPTS - 1:
                scale = self._jitter.uniform(RETRY_JITTER_LOW, RETRY_JITTER_HIGH)
                self._sleep(RETRY_BASE_DELAY * RETRY_FACTOR**attempt * scale)
        raise TransportError(f"giving up after {RETRY_MAX_ATTEMPTS} attempts: {last_error}")

    @staticmethod
    def _parse(payload: dict, latency_s: float) -> ChatResponse:
        try:
            choice = payload["choices"][0]
            content = choice["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProtocolError(f"malformed completion payload: {str(payload)[:300]}")
        if content is None:
            raise ProtocolError("completion payload has null content")
        return ChatResponse(
            content=content,
            finish_reason=choice.get("finish_reason", "stop"),
            usage=payload.get("usage", {}),
            latency_s=latency_s,
        )


@dataclass
class GatewayStats:
    """Mutable call counters; read them in tests and budget audits."""

    total: int = 0
    by_purpose: dict[str, int] = field(default_factory=dict)
    cache_hits: int = 0
    live_calls: int = 0
    synthetic_calls: int = 0

    def snapshot(self) -> dict:
        return {
            "total": self.total,
            "by_purpose": dict(self.by_purpose),
            "cache_hits": self.cache_hits,
            "live_calls": self.live_calls,
            "synthetic_calls": self.synthetic_calls,
        }


class Gateway:
    """Single entry point for model calls.

    Modes:
      live       direct endpoint traffic, no cache
      record     cache first, live on miss, response appended to the cache
      replay     cache only; a miss raises (strict replay)
      synthetic  offline environment adapter, no cache, no network
    """

    def __init__(
        self,
        mode: str,
        models: Mapping[str, str],
        cache: ReplayCache | None = None,
        live: LiveBackend | None = None,
        synthetic=None,
        limiter: RateLimiter | None = None,
    ) -> None:
        if mode not in ("live", "record", "replay", "synthetic"):
            raise ConfigurationError(f"unknown gateway mode {mode!r}")
        missing = [p for p in PURPOSES if p not in models]
        if missing:
            raise ConfigurationError(f"missing model ids for purposes: {missing}")
        if mode in ("record", "replay") and cache is None:
            raise ConfigurationError(f"{mode} mode needs a replay cache")
        if mode in ("live", "record") and live is None:
            raise ConfigurationError(f"{mode} mode needs a live backend")
        if mode == "synthetic" and synthetic is None:
            raise ConfigurationError("synthetic mode needs an environment adapter")
        self.mode = mode
        self.models = dict(models)
        self.cache = cache
        self.live = live
        self.synthetic = synthetic
        self.limiter = limiter
        self.stats = GatewayStats()
        self._lock = threading.Lock()

    def model_for(self, purpose: str) -> str:
        if purpose not in PURPOSES:
            raise ContractError(f"unknown purpose {purpose!r}")
        return self.models[purpose]

    def chat(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.stats.total += 1
            self.stats.by_purpose[request.purpose] = (
                self.stats.by_purpose.get(request.purpose, 0) + 1
            )
        if self.mode == "synthetic":
            with self._lock:
                self.stats.synthetic_calls += 1
            return self.synthetic.chat(request)
        key = cache_key(request)
        if self.cache is not None:
            cached = self.cache.lookup(key)
            if cached is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return cached
            if self.mode == "replay":
                raise CacheMissError(
                    f"request {key[:16]}... (purpose={request.purpose}) not in replay cache"
                )
        response = self._live_call(request)
        if self.cache is not None:
            self.cache.store(key, request, response)
        return response

    def _live_call(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.stats.live_calls += 1
        if self.limiter is not None:
            with self.limiter:
                return self.live.chat(request)
        return self.live.chat(request)


def build_gateway(
    mode: str,
    models: Mapping[str, str],
    endpoint: str | None = None,
    api_key_env: str = "OPENAI_API_KEY",
    cache_path: str | Path | None = None,
    synthetic=None,
    max_concurrent: int = 4,
    max_per_minute: int = 60,
) -> Gateway:
    """Assemble a gateway from plain config values."""
    cache = ReplayCache(cache_path) if cache_path is not None else None
    live = None
    if mode in ("live", "record"):
        if endpoint is None:
            raise ConfigurationError(f"{mode} mode needs an endpoint URL")
        live = LiveBackend(endpoint, api_key_env=api_key_env)
    limiter = RateLimiter(max_concurrent, max_per_minute) if mode in ("live", "record") else None
    return Gateway(
        mode=mode,
        models=models,
        cache=cache,
        live=live,
        synthetic=synthetic,
        limiter=limiter,
    )
