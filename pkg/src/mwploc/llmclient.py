"""Provider-agnostic LLM completion client.

Two implementations of the same single-method interface: HttpProvider talks
to an OpenAI- or Gemini-style chat endpoint with rate limiting and retries,
MockProvider replays canned responses from a fixture file so the whole
pipeline runs offline and deterministically.

API keys come from the environment and are never written to logs, exception
messages, or any serialized output.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol

import httpx

from .errors import AuthError, LlmError, MockFixtureError, TransportError

log = logging.getLogger(__name__)

DEFAULT_ENDPOINTS = {
    "openai": "https://api.openai.com/v1/chat/completions",
    "gemini": "https://generativelanguage.googleapis.com/v1beta/models",
}
DEFAULT_KEY_ENVS = {
    "openai": "OPENAI_API_KEY",
    "gemini": "GEMINI_API_KEY",
}


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    temperature: float = 0.0
    max_output: int = 512
    tag: str = ""

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature != 0.0:
            raise ValueError(
                "runs must be reproducible: temperature is pinned to 0.0, "
                f"got {self.temperature}"
            )
        if self.max_output <= 0:
            raise ValueError("max_output must be positive")


class LlmProvider(Protocol):
    def complete(self, request: LlmRequest) -> str: ...


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ProviderConfig:
    adapter: str
    model: str
    endpoint: str = ""
    key_env: str = ""
    rpm: int = 60
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    # Prepend a per-request marker line to the prompt to defeat server-side
    # response caches.  Off by default: it perturbs prompts.
    cache_buster: bool = False

    def __post_init__(self):
        if self.adapter not in _ADAPTERS:
            raise ValueError(
                f"unknown adapter {self.adapter!r}; expected one of "
                + ", ".join(sorted(_ADAPTERS))
            )
        if self.rpm < 1:
            raise ValueError("rpm must be >= 1")

    def resolved_endpoint(self) -> str:
        return self.endpoint or DEFAULT_ENDPOINTS[self.adapter]

    def resolved_key_env(self) -> str:
        return self.key_env or DEFAULT_KEY_ENVS[self.adapter]


class RateLimiter:
    """Sliding-window pacing: at most `rpm` dispatches in any 60 s window.

    Clock and sleep are injectable for tests.
    """

    WINDOW = 60.0

    def __init__(
        self,
        rpm: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._rpm = rpm
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._stamps: deque[float] = deque()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                while self._stamps and self._stamps[0] <= now - self.WINDOW:
                    self._stamps.popleft()
                if len(self._stamps) < self._rpm:
                    self._stamps.append(now)
                    return
                self._sleep(self._stamps[0] + self.WINDOW - now)


def _openai_payload(request: LlmRequest, cfg: ProviderConfig, prompt: str) -> dict:
    return {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": request.temperature,
        "max_tokens": request.max_output,
    }


def _openai_parse(data: Any) -> str:
    return data["choices"][0]["message"]["content"]


def _openai_headers(key: str) -> dict[str, str]:
    return {"Authorization": f"Bearer {key}"}


def _openai_url(cfg: ProviderConfig) -> str:
    return cfg.resolved_endpoint()


def _gemini_payload(request: LlmRequest, cfg: ProviderConfig, prompt: str) -> dict:
    return {
        "contents": [{"role": "user", "parts": [{"text": prompt}]}],
        "generationConfig": {
            "temperature": request.temperature,
            "maxOutputTokens": request.max_output,
        },
    }


def _gemini_parse(data: Any) -> str:
    parts = data["candidates"][0]["content"]["parts"]
    return "".join(p["text"] for p in parts)


def _gemini_headers(key: str) -> dict[str, str]:
    return {"x-goog-api-key": key}


def _gemini_url(cfg: ProviderConfig) -> str:
    base = cfg.resolved_endpoint()
    if cfg.endpoint:
        return base
    return f"{base}/{cfg.model}:generateContent"


@dataclass(frozen=True)
class _Adapter:
    payload: Callable[[LlmRequest, ProviderConfig, str], dict]
    parse: Callable[[Any], str]
    headers: Callable[[str], dict[str, str]]
    url: Callable[[ProviderConfig], str]


_ADAPTERS = {
    "openai": _Adapter(_openai_payload, _openai_parse, _openai_headers, _openai_url),
    "gemini": _Adapter(_gemini_payload, _gemini_parse, _gemini_headers, _gemini_url),
}

_RETRYABLE = {429}


class HttpProvider:
    """Synchronous HTTP client with pacing and exponential-backoff retries.

    Retries cover timeouts, connection errors, HTTP 429 and 5xx.  HTTP 401
    and 403 raise AuthError immediately.  A custom transport, clock, and
    sleep can be injected for tests.
    """

    def __init__(
        self,
        cfg: ProviderConfig,
        transport: httpx.BaseTransport | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        key_env = cfg.resolved_key_env()
        key = os.environ.get(key_env, "")
        if not key:
            raise AuthError(f"environment variable {key_env} is not set")
        self._cfg = cfg
        self._adapter = _ADAPTERS[cfg.adapter]
        self._key = key
        self._limiter = RateLimiter(cfg.rpm, clock=clock, sleep=sleep)
        self._sleep = sleep
        self._client = httpx.Client(timeout=cfg.timeout, transport=transport)
        self._count_lock = threading.Lock()
        self.request_count = 0

    def close(self) -> None:
        self._client.close()

    def complete(self, request: LlmRequest) -> str:
        prompt = request.prompt
        if self._cfg.cache_buster:
            prompt = f"[request {request.tag or prompt_key(request.prompt)}]\n{prompt}"
        payload = self._adapter.payload(request, self._cfg, prompt)
        headers = self._adapter.headers(self._key)
        url = self._adapter.url(self._cfg)
        retry = self._cfg.retry
        last_failure = "no attempt made"
        for attempt in range(retry.max_attempts):
            if attempt:
                delay = retry.backoff_base * (2 ** (attempt - 1))
                log.debug("retrying request %s in %.2fs: %s", request.tag, delay, last_failure)
                self._sleep(delay)
            self._limiter.acquire()
            with self._count_lock:
                self.request_count += 1
            try:
                response = self._client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue
            status = response.status_code
            if status in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {status})")
            if status in _RETRYABLE or status >= 500:
                last_failure = f"HTTP {status}"
                continue
            if status != 200:
                raise LlmError(f"unexpected HTTP {status}: {response.text[:200]}")
            try:
                return self._adapter.parse(response.json())
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise LlmError(f"malformed provider response: {exc}") from exc
        raise TransportError(
            f"gave up after {retry.max_attempts} attempts ({last_failure})"
        )


def prompt_key(prompt: str) -> str:
    """Content-addressed fixture key for a prompt."""
    return "sha256:" + hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class MockCall:
    tag: str
    prompt: str
    response: str


class MockProvider:
    """Scripted provider replaying fixtures.

    A request resolves to the fixture under its tag first, then under the
    content hash of its prompt (see prompt_key).  Unknown requests raise
    MockFixtureError so silent drift is impossible.  Every served call is
    recorded on `transcript`.
    """

    def __init__(self, fixtures: Mapping[str, str]):
        for key, value in fixtures.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise MockFixtureError("fixture keys and values must be strings")
        self._fixtures = dict(fixtures)
        self._lock = threading.Lock()
        self.transcript: list[MockCall] = []

    def complete(self, request: LlmRequest) -> str:
        key = request.tag if request.tag in self._fixtures else prompt_key(request.prompt)
        try:
            response = self._fixtures[key]
        except KeyError:
            raise MockFixtureError(
                f"no fixture for tag {request.tag!r} or key {prompt_key(request.prompt)!r}"
            ) from None
        with self._lock:
            self.transcript.append(
                MockCall(tag=request.tag, prompt=request.prompt, response=response)
            )
        return response


def _reject_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise MockFixtureError(f"duplicate fixture key {key!r}")
        out[key] = value
    return out


def load_mock_fixtures(path: str | Path) -> MockProvider:
    path = Path(path)
    try:
        obj = json.loads(
            path.read_text(encoding="utf-8"), object_pairs_hook=_reject_duplicate_keys
        )
    except json.JSONDecodeError as exc:
        raise MockFixtureError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MockFixtureError(f"{path}: fixture root must be an object")
    return MockProvider(obj)
