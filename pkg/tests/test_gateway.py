"""Backends, retries, and exact call accounting."""

from __future__ import annotations

import json
import threading

import pytest

from tablemender.errors import BackendError, ConfigError
from tablemender.gateway import (
    CompletionRequest,
    HttpBackend,
    ModelGateway,
    ReplayBackend,
    ScriptedBackend,
    configure_backend,
    request_digest,
)


def _req(prompt="hello world", tag="t"):
    return CompletionRequest(prompt=prompt, tag=tag)


class TestReplayBackend:
    def test_serves_in_order(self):
        gateway = ModelGateway(ReplayBackend([{"response": "resp1"}]))
        assert gateway.complete(_req()) == "resp1"
        assert gateway.ledger.total_calls == 1

    def test_exhausted_still_counts(self):
        gateway = ModelGateway(ReplayBackend([]))
        with pytest.raises(BackendError, match="exhausted"):
            gateway.complete(_req(tag="audit"))
        assert gateway.ledger.total_calls == 1
        assert gateway.ledger.per_tag["audit"] == 1

    def test_digest_keyed_responses(self):
        prompt = "the special prompt"
        records = [
            {"digest": request_digest(prompt), "response": "keyed"},
            {"response": "fallback"},
        ]
        backend = ReplayBackend(records)
        gateway = ModelGateway(backend)
        assert gateway.complete(_req(prompt="something else")) == "fallback"
        assert gateway.complete(_req(prompt=prompt)) == "keyed"

    def test_from_file(self, tmp_path):
        path = tmp_path / "fix.json"
        path.write_text(json.dumps([{"response": "a"}, {"response": "b"}]))
        backend = ReplayBackend.from_file(path)
        gateway = ModelGateway(backend)
        assert [gateway.complete(_req()) for _ in range(2)] == ["a", "b"]

    def test_malformed_fixture(self, tmp_path):
        path = tmp_path / "fix.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ReplayBackend.from_file(path)


class TestScriptedBackend:
    def test_substring_match(self):
        backend = ScriptedBackend([("24-Hour", "rule snippet"), ("", "default")])
        gateway = ModelGateway(backend)
        assert gateway.complete(_req(prompt="impute the 24-Hour column")) == "rule snippet"
        assert gateway.complete(_req(prompt="anything")) == "default"

    def test_no_match_errors(self):
        gateway = ModelGateway(ScriptedBackend([("zzz", "never")]))
        with pytest.raises(BackendError, match="no scripted rule"):
            gateway.complete(_req())
        assert gateway.ledger.total_calls == 1


class TestHttpBackend:
    def test_missing_credential_fails_before_any_call(self, monkeypatch):
        monkeypatch.delenv("WRANGLE_TOKEN", raising=False)
        with pytest.raises(ConfigError, match="WRANGLE_TOKEN"):
            HttpBackend("http://example/v1", "some-model", "WRANGLE_TOKEN")

    def test_retry_then_success(self, monkeypatch):
        monkeypatch.setenv("WRANGLE_TOKEN", "secret")
        calls = {"n": 0}

        class FakeResponse:
            def __enter__(self):
                return self

            def __exit__(self, *args):
                return False

            def read(self):
                return json.dumps({"text": "served"}).encode()

        def opener(request, timeout):
            calls["n"] += 1
            if calls["n"] < 2:
                raise OSError("transient")
            return FakeResponse()

        backend = HttpBackend(
            "http://example/v1", "m", "WRANGLE_TOKEN", backoff_s=0.0, opener=opener
        )
        assert backend.complete(_req()) == "served"
        assert calls["n"] == 2

    def test_exhausted_retries_error(self, monkeypatch):
        monkeypatch.setenv("WRANGLE_TOKEN", "secret")

        def opener(request, timeout):
            raise OSError("down")

        backend = HttpBackend(
            "http://example/v1", "m", "WRANGLE_TOKEN", retries=2, backoff_s=0.0, opener=opener
        )
        with pytest.raises(BackendError, match="3 attempts"):
            backend.complete(_req(tag="fold0"))

    def test_configure_requires_settings(self):
        with pytest.raises(ConfigError):
            configure_backend("http", {"endpoint": "http://x"})


class TestLedger:
    def test_twenty_calls_accounted(self):
        gateway = ModelGateway(ReplayBackend([{"response": f"r{i}"} for i in range(20)]))
        for i in range(20):
            gateway.complete(_req(tag=f"fold{i % 5}"))
        assert gateway.ledger.total_calls == 20
        assert sum(gateway.ledger.per_tag.values()) == 20
        assert len(gateway.ledger.transcript) == 20

    def test_truncation_flagged(self):
        gateway = ModelGateway(ReplayBackend([{"response": "x" * 100}]), response_char_cap=10)
        text = gateway.complete(_req())
        assert len(text) == 10
        assert gateway.ledger.transcript[-1].truncated

    def test_concurrent_accounting_exact(self):
        gateway = ModelGateway(ScriptedBackend([("", "ok")]))
        threads = [
            threading.Thread(
                target=lambda i=i: [gateway.complete(_req(tag=f"w{i}")) for _ in range(25)]
            )
            for i in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert gateway.ledger.total_calls == 200
        assert sum(gateway.ledger.per_tag.values()) == 200
        assert len(gateway.ledger.transcript) == 200

    def test_unknown_backend_kind(self):
        with pytest.raises(ConfigError, match="unknown backend"):
            configure_backend("telepathy", {})

    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(prompt="")
