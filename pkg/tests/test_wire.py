from __future__ import annotations

import json

import pytest

from nliforge.wire import (
    CallableTransport,
    CountingTransport,
    FixtureTransport,
    ModelEndpoint,
    TransportError,
    post_with_retries,
    request_hash,
    resolve_transport,
)


class FlakyTransport:
    """Fails with retryable errors until the configured attempt."""

    def __init__(self, succeed_on: int, retryable: bool = True):
        self.succeed_on = succeed_on
        self.retryable = retryable
        self.attempts = 0

    def post_json(self, url, payload, *, timeout=30.0, headers=None):
        self.attempts += 1
        if self.attempts < self.succeed_on:
            raise TransportError("boom", retryable=self.retryable)
        return {"ok": True, "attempt": self.attempts}


class TestEndpoint:
    def test_validation(self):
        with pytest.raises(ValueError):
            ModelEndpoint(base_url="http://x", max_retries=-1)
        with pytest.raises(ValueError):
            ModelEndpoint(base_url="http://x", max_in_flight=0)
        with pytest.raises(ValueError):
            ModelEndpoint(base_url="http://x", temperature=-0.1)

    def test_frozen(self):
        endpoint = ModelEndpoint(base_url="http://x")
        with pytest.raises(AttributeError):
            endpoint.base_url = "http://y"  # type: ignore[misc]


class TestRequestHash:
    def test_key_order_does_not_matter(self):
        a = request_hash("http://u", {"x": 1, "y": 2})
        b = request_hash("http://u", {"y": 2, "x": 1})
        assert a == b

    def test_url_matters(self):
        assert request_hash("http://u", {}) != request_hash("http://v", {})


class TestRetries:
    def test_retries_until_success(self):
        endpoint = ModelEndpoint(base_url="http://x", max_retries=3, backoff_base=0.0)
        flaky = FlakyTransport(succeed_on=3)
        assert post_with_retries(endpoint, "http://x", {}, flaky)["attempt"] == 3

    def test_exhaustion_raises(self):
        endpoint = ModelEndpoint(base_url="http://x", max_retries=1, backoff_base=0.0)
        flaky = FlakyTransport(succeed_on=99)
        with pytest.raises(TransportError, match="exhausted 2 attempts"):
            post_with_retries(endpoint, "http://x", {}, flaky)
        assert flaky.attempts == 2

    def test_non_retryable_fails_fast(self):
        endpoint = ModelEndpoint(base_url="http://x", max_retries=5, backoff_base=0.0)
        flaky = FlakyTransport(succeed_on=99, retryable=False)
        with pytest.raises(TransportError, match="boom"):
            post_with_retries(endpoint, "http://x", {}, flaky)
        assert flaky.attempts == 1


class TestFixtureTransport:
    def test_replays_recorded_response(self, tmp_path):
        path = tmp_path / "fixture.jsonl"
        key = request_hash("http://svc", {"q": 1})
        path.write_text(json.dumps(
            {"request_hash": key, "request": {"url": "http://svc", "payload": {"q": 1}},
             "response": {"a": 2}}) + "\n")
        transport = FixtureTransport(path)
        assert transport.post_json("http://svc", {"q": 1}) == {"a": 2}

    def test_miss_without_fallback_raises(self, tmp_path):
        transport = FixtureTransport(tmp_path / "empty.jsonl")
        with pytest.raises(TransportError, match="no recorded response"):
            transport.post_json("http://svc", {"q": 1})

    def test_record_mode_appends_and_replays(self, tmp_path):
        path = tmp_path / "fixture.jsonl"
        inner = CallableTransport(lambda url, payload: {"echo": payload["q"]})
        recorder = FixtureTransport(path, fallback=inner, record=True)
        assert recorder.post_json("http://svc", {"q": 5}) == {"echo": 5}
        assert inner.calls == 1
        # second call must come from the fixture, not the fallback
        assert recorder.post_json("http://svc", {"q": 5}) == {"echo": 5}
        assert inner.calls == 1
        replayer = FixtureTransport(path)
        assert replayer.post_json("http://svc", {"q": 5}) == {"echo": 5}


class TestResolveTransport:
    def test_override_wins(self):
        override = CallableTransport(lambda url, payload: {})
        endpoint = ModelEndpoint(base_url="mock://judge/echo")
        assert resolve_transport(endpoint, override) is override

    def test_mock_scheme_dispatches(self):
        endpoint = ModelEndpoint(base_url="mock://classify/neutral")
        transport = resolve_transport(endpoint)
        response = transport.post_json("mock://classify/neutral",
                                       {"premise": "p", "hypothesis": "h"})
        assert response["label"] == "neutral"

    def test_fixture_path_used(self, tmp_path):
        endpoint = ModelEndpoint(base_url="http://svc",
                                 fixture_path=str(tmp_path / "f.jsonl"))
        assert isinstance(resolve_transport(endpoint), FixtureTransport)


class TestCountingTransport:
    def test_counts_accumulate(self):
        calls: dict[str, int] = {}
        inner = CallableTransport(lambda url, payload: {})
        counting = CountingTransport(inner, calls, "svc")
        counting.post_json("http://x", {})
        counting.post_json("http://x", {})
        assert calls == {"svc": 2}
