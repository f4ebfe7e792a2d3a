"""Uniform completion interface over pluggable backends with exact call accounting.

Every completion, successful or not, increments the ledger exactly once; the
ledger total is the quantity the evaluation harness compares across modes.
No other module performs network activity.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import BackendError, ConfigError

DEFAULT_MAX_OUTPUT_TOKENS = 1024
DEFAULT_RESPONSE_CHAR_CAP = 65536
DEFAULT_RETRIES = 2
DEFAULT_MAX_INFLIGHT = 4
CODEGEN_TEMPERATURE = 0.2
BASELINE_TEMPERATURE = 0.0


def request_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    temperature: float = CODEGEN_TEMPERATURE
    tag: str = ""

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("empty prompt")


@dataclass(frozen=True)
class TranscriptRecord:
    request_digest: str
    response_digest: str
    latency_ms: float
    tag: str
    ok: bool
    truncated: bool


@dataclass
class CallLedger:
    total_calls: int = 0
    per_tag: dict[str, int] = field(default_factory=dict)
    transcript: list[TranscriptRecord] = field(default_factory=list)


class ReplayBackend:
    """Serves recorded responses: digest-keyed when available, recorded order otherwise."""

    name = "replay"

    def __init__(self, records: list[dict]):
        self._by_digest: dict[str, deque[str]] = {}
        self._ordered: deque[str] = deque()
        for record in records:
            response = record["response"]
            digest = record.get("digest")
            if digest:
                self._by_digest.setdefault(digest, deque()).append(response)
            else:
                self._ordered.append(response)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        try:
            records = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"malformed replay fixture {path}: {exc}") from exc
        if not isinstance(records, list):
            raise ConfigError(f"replay fixture {path} must be a JSON array")
        return cls(records)

    def complete(self, request: CompletionRequest) -> str:
        digest = request_digest(request.prompt)
        queue = self._by_digest.get(digest)
        if queue:
            return queue.popleft()
        if self._ordered:
            return self._ordered.popleft()
        raise BackendError("replay fixture exhausted", tag=request.tag)


class ScriptedBackend:
    """Maps prompt substrings to canned responses; first matching rule wins."""

    name = "scripted"

    def __init__(self, rules: list[tuple[str, str]]):
        self._rules = list(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"malformed scripted rules {path}: {exc}") from exc
        if isinstance(payload, dict):
            payload = payload.get("rules", [])
        rules = [(str(r["pattern"]), str(r["response"])) for r in payload]
        return cls(rules)

    def complete(self, request: CompletionRequest) -> str:
        for pattern, response in self._rules:
            if pattern in request.prompt:
                return response
        raise BackendError("no scripted rule matched the prompt", tag=request.tag)


class HttpBackend:
    """JSON POST {model, prompt, max_tokens, temperature} -> {text}."""

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: str,
        timeout_s: float = 60.0,
        retries: int = DEFAULT_RETRIES,
        backoff_s: float = 0.5,
        opener: Callable | None = None,
    ):
        credential = os.environ.get(credential_env)
        if not credential:
            raise ConfigError(
                f"credential environment variable {credential_env!r} is not set"
            )
        self._endpoint = endpoint
        self._model = model
        self._credential = credential
        self._timeout_s = timeout_s
        self._retries = retries
        self._backoff_s = backoff_s
        self._opener = opener or urllib.request.urlopen

    def complete(self, request: CompletionRequest) -> str:
        body = json.dumps(
            {
                "model": self._model,
                "prompt": request.prompt,
                "max_tokens": request.max_output_tokens,
                "temperature": request.temperature,
            }
        ).encode("utf-8")
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff_s * 2 ** (attempt - 1))
            http_request = urllib.request.Request(
                self._endpoint,
                data=body,
                headers={
                    "Content-Type": "application/json",
                    "Authorization": f"Bearer {self._credential}",
                },
            )
            try:
                with self._opener(http_request, timeout=self._timeout_s) as response:
                    payload = json.loads(response.read().decode("utf-8"))
                return str(payload["text"])
            except (urllib.error.URLError, OSError, KeyError, json.JSONDecodeError) as exc:
                last_error = exc
        raise BackendError(
            f"http backend failed after {self._retries + 1} attempts: {last_error}",
            tag=request.tag,
        )


def configure_backend(kind: str, settings: dict) -> object:
    """Build a backend handle from a kind name and its settings."""
    if kind == "replay":
        return ReplayBackend.from_file(settings["path"])
    if kind == "scripted":
        if "rules" in settings:
            return ScriptedBackend(settings["rules"])
        return ScriptedBackend.from_file(settings["path"])
    if kind == "http":
        try:
            return HttpBackend(
                endpoint=settings["endpoint"],
                model=settings["model"],
                credential_env=settings["credential_env"],
                timeout_s=float(settings.get("timeout_s", 60.0)),
                retries=int(settings.get("retries", DEFAULT_RETRIES)),
            )
        except KeyError as exc:
            raise ConfigError(f"http backend requires setting {exc}") from exc
    raise ConfigError(f"unknown backend kind {kind!r}")


class ModelGateway:
    """Completion front door; owns the ledger and the in-flight limit."""

    def __init__(
        self,
        backend,
        response_char_cap: int = DEFAULT_RESPONSE_CHAR_CAP,
        max_inflight: int = DEFAULT_MAX_INFLIGHT,
    ):
        self.backend = backend
        self.ledger = CallLedger()
        self._response_char_cap = response_char_cap
        self._lock = threading.Lock()
        self._inflight = threading.Semaphore(max_inflight)

    def complete(self, request: CompletionRequest) -> str:
        digest = request_digest(request.prompt)
        with self._lock:
            self.ledger.total_calls += 1
            self.ledger.per_tag[request.tag] = self.ledger.per_tag.get(request.tag, 0) + 1
        started = time.perf_counter()
        try:
            with self._inflight:
                text = self.backend.complete(request)
        except BackendError as exc:
            self._record(digest, "", started, request.tag, ok=False, truncated=False)
            raise BackendError(str(exc), tag=request.tag) from exc
        truncated = len(text) > self._response_char_cap
        if truncated:
            text = text[: self._response_char_cap]
        self._record(digest, request_digest(text), started, request.tag, True, truncated)
        return text

    def _record(
        self, digest: str, response_digest: str, started: float, tag: str, ok: bool, truncated: bool
    ) -> None:
        record = TranscriptRecord(
            request_digest=digest,
            response_digest=response_digest,
            latency_ms=(time.perf_counter() - started) * 1000.0,
            tag=tag,
            ok=ok,
            truncated=truncated,
        )
        with self._lock:
            self.ledger.transcript.append(record)
