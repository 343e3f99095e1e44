"""Endpoint descriptors and transports shared by every model client.

A transport is anything with ``post_json(url, payload, timeout=..., headers=...)``
returning the decoded response dict.  Three kinds ship here:

  * HttpxTransport  - real network calls
  * FixtureTransport - replay (and optionally record) request/response pairs
    from a JSONL fixture file, keyed by a hash of the canonical request
  * CallableTransport - wraps a plain function, for tests and mocks

``base_url`` schemes ``mock://...`` resolve to the built-in deterministic
mocks (see mocks.py), so a whole pipeline can run with no network at all.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx


class TransportError(RuntimeError):
    """A transport-level failure (connection, HTTP error, missing fixture)."""

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class ModelEndpoint:
    """Configuration handle for one hosted (or mocked) model.

    Frozen so endpoints can be shared across threads and used as registry
    keys for per-endpoint in-flight limiting.
    """

    base_url: str
    model_id: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 30.0
    max_in_flight: int = 4
    api_key_env: str | None = None
    fixture_path: str | None = None
    record: bool = False
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class Transport(Protocol):
    def post_json(self, url: str, payload: dict, *, timeout: float = 30.0,
                  headers: dict | None = None) -> dict: ...


def request_hash(url: str, payload: dict) -> str:
    """Stable hash of a request, used as the fixture lookup key."""
    canonical = json.dumps({"url": url, "payload": payload}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class HttpxTransport:
    """Real HTTP POST with JSON body; 5xx/429 and connect errors are retryable."""

    def __init__(self) -> None:
        self._client = httpx.Client()

    def post_json(self, url: str, payload: dict, *, timeout: float = 30.0,
                  headers: dict | None = None) -> dict:
        try:
            resp = self._client.post(url, json=payload, timeout=timeout, headers=headers)
        except httpx.HTTPError as err:
            raise TransportError(f"request to {url} failed: {err}", retryable=True) from err
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransportError(
                f"{url} returned HTTP {resp.status_code}", retryable=True
            )
        if resp.status_code >= 400:
            raise TransportError(f"{url} returned HTTP {resp.status_code}", retryable=False)
        try:
            return resp.json()
        except ValueError as err:
            raise TransportError(f"{url} returned non-JSON body", retryable=False) from err


class CallableTransport:
    """Adapts ``fn(url, payload) -> dict`` to the transport protocol."""

    def __init__(self, fn: Callable[[str, dict], dict]):
        self._fn = fn
        self.calls = 0

    def post_json(self, url: str, payload: dict, *, timeout: float = 30.0,
                  headers: dict | None = None) -> dict:
        self.calls += 1
        return self._fn(url, payload)


class FixtureTransport:
    """Replays responses recorded in a JSONL fixture file.

    Each line is ``{"request_hash", "request": {"url", "payload"}, "response"}``.
    With a fallback transport and record=True, misses go to the fallback and
    the exchange is appended to the fixture.
    """

    def __init__(self, path: str | Path, fallback: Transport | None = None,
                 record: bool = False):
        self.path = Path(path)
        self.fallback = fallback
        self.record = record
        self._responses: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    self._responses[rec["request_hash"]] = rec["response"]

    def post_json(self, url: str, payload: dict, *, timeout: float = 30.0,
                  headers: dict | None = None) -> dict:
        key = request_hash(url, payload)
        with self._lock:
            if key in self._responses:
                return self._responses[key]
        if self.fallback is None or not self.record:
            raise TransportError(
                f"no recorded response for request {key[:12]}... in {self.path}",
                retryable=False,
            )
        response = self.fallback.post_json(url, payload, timeout=timeout, headers=headers)
        with self._lock:
            self._responses[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"request_hash": key, "request": {"url": url, "payload": payload},
                     "response": response},
                    ensure_ascii=False) + "\n")
        return response


class CountingTransport:
    """Wraps a transport and counts post attempts into a shared dict."""

    def __init__(self, inner: Transport, counters: dict[str, int], key: str):
        self._inner = inner
        self._counters = counters
        self._key = key
        self._lock = threading.Lock()

    def post_json(self, url: str, payload: dict, *, timeout: float = 30.0,
                  headers: dict | None = None) -> dict:
        with self._lock:
            self._counters[self._key] = self._counters.get(self._key, 0) + 1
        return self._inner.post_json(url, payload, timeout=timeout, headers=headers)


_semaphores: dict[ModelEndpoint, threading.BoundedSemaphore] = {}
_semaphores_lock = threading.Lock()
_default_http: HttpxTransport | None = None


def _in_flight_limiter(endpoint: ModelEndpoint) -> threading.BoundedSemaphore:
    with _semaphores_lock:
        sem = _semaphores.get(endpoint)
        if sem is None:
            sem = threading.BoundedSemaphore(endpoint.max_in_flight)
            _semaphores[endpoint] = sem
        return sem


def resolve_transport(endpoint: ModelEndpoint, override: Transport | None = None) -> Transport:
    """Pick the transport for an endpoint: override > mock:// > fixture > HTTP."""
    if override is not None:
        return override
    if endpoint.base_url.startswith("mock://"):
        from . import mocks  # deferred: mocks import corpus helpers

        return CallableTransport(mocks.dispatch)
    global _default_http
    if _default_http is None:
        _default_http = HttpxTransport()
    if endpoint.fixture_path:
        fallback = _default_http if endpoint.record else None
        return FixtureTransport(endpoint.fixture_path, fallback=fallback,
                                record=endpoint.record)
    return _default_http


def auth_headers(endpoint: ModelEndpoint) -> dict | None:
    if not endpoint.api_key_env:
        return None
    key = os.environ.get(endpoint.api_key_env)
    if not key:
        return None
    return {"Authorization": f"Bearer {key}"}


def post_with_retries(endpoint: ModelEndpoint, url: str, payload: dict,
                      transport: Transport | None = None) -> dict:
    """POST with exponential backoff on retryable failures.

    Total attempts never exceed max_retries + 1.  The endpoint's in-flight
    semaphore is held for the duration of each attempt.
    """
    transport = resolve_transport(endpoint, transport)
    headers = auth_headers(endpoint)
    limiter = _in_flight_limiter(endpoint)
    last_err: TransportError | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt > 0 and endpoint.backoff_base > 0:
            time.sleep(endpoint.backoff_base * (2 ** (attempt - 1)))
        with limiter:
            try:
                return transport.post_json(url, payload, timeout=endpoint.timeout,
                                           headers=headers)
            except TransportError as err:
                last_err = err
                if not err.retryable:
                    raise
    assert last_err is not None
    raise TransportError(
        f"exhausted {endpoint.max_retries + 1} attempts against {url}: {last_err}",
        retryable=False,
    )
