"""Snippet execution behind a uniform per-row contract.

Two executors implement the same protocol contract: an in-process stub for
fast deterministic pipelines, and a subprocess client speaking JSON Lines
(protocol v1) to an isolated runner. Sources reach either one only after
passing the orchestrator's safety scan.
"""

from __future__ import annotations

import builtins
import json
import math
import queue
import subprocess
import sys
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ExecutorError
from .prompts import ENTRY_POINT, UNKNOWN

PROTOCOL_VERSION = 1
READY_TIMEOUT_S = 3.0
DEFAULT_BATCH_TIMEOUT_MS = 5000  # budget per 1000-row batch
KILL_FACTOR = 2.0  # session killed within KILL_FACTOR * budget

ALLOWED_SNIPPET_MODULES = ("math", "string", "datetime", "re")

_SAFE_BUILTIN_NAMES = (
    "abs", "all", "any", "ascii", "bin", "bool", "bytes", "callable", "chr",
    "complex", "dict", "divmod", "enumerate", "filter", "float", "format",
    "frozenset", "hash", "hex", "int", "isinstance", "issubclass", "iter",
    "len", "list", "map", "max", "min", "next", "oct", "ord", "pow", "range",
    "repr", "reversed", "round", "set", "slice", "sorted", "str", "sum",
    "tuple", "zip",
    "ArithmeticError", "AttributeError", "BaseException", "Exception",
    "IndexError", "KeyError", "LookupError", "OverflowError", "RuntimeError",
    "StopIteration", "TypeError", "ValueError", "ZeroDivisionError",
)


@dataclass(frozen=True)
class RowResult:
    id: int
    value: str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if root not in ALLOWED_SNIPPET_MODULES:
        raise ImportError(f"module {name!r} is not available to snippets")
    return builtins.__import__(name, globals, locals, fromlist, level)


def build_restricted_namespace() -> dict:
    """Globals for snippet execution: curated builtins, allowlisted imports only."""
    safe = {name: getattr(builtins, name) for name in _SAFE_BUILTIN_NAMES}
    safe["__import__"] = _guarded_import
    return {"__builtins__": safe, "__name__": "snippet"}


def coerce_value(value) -> str:
    """Canonical string form of a transform return; the None sentinel means Unknown."""
    if value is None:
        return UNKNOWN
    if isinstance(value, str):
        return value
    return str(value)


def load_transform(source: str, namespace: dict | None = None):
    """Compile and exec a snippet, returning its transform callable."""
    namespace = namespace if namespace is not None else build_restricted_namespace()
    try:
        exec(compile(source, "<snippet>", "exec"), namespace)
    except Exception as exc:
        raise ExecutorError(f"snippet failed to load: {type(exc).__name__}: {exc}") from exc
    transform = namespace.get(ENTRY_POINT)
    if not callable(transform):
        raise ExecutorError(f"snippet defines no callable {ENTRY_POINT}(row)")
    return transform


class InProcessExecutor:
    """Protocol-contract stub: same row semantics as the runner, no process boundary.

    Wall-clock containment is the subprocess executor's job; this stub is for
    trusted, already-scanned snippets in tests and single-process pipelines.
    """

    def run(
        self,
        source: str,
        rows: Sequence[dict[str, str | None]],
        batch_timeout_ms: int = DEFAULT_BATCH_TIMEOUT_MS,
    ) -> list[RowResult]:
        transform = load_transform(source)
        results = []
        for i, row in enumerate(rows):
            try:
                value = transform(dict(row))
            except Exception as exc:
                results.append(RowResult(id=i, error=f"{type(exc).__name__}: {exc}"))
                continue
            results.append(RowResult(id=i, value=coerce_value(value)))
        return results


class SubprocessExecutor:
    """Drives one isolated runner process per session over JSON Lines (protocol v1)."""

    def __init__(self, command: Sequence[str] | None = None):
        self.command = list(command) if command else [sys.executable, "-m", "rowrunner"]

    def run(
        self,
        source: str,
        rows: Sequence[dict[str, str | None]],
        batch_timeout_ms: int = DEFAULT_BATCH_TIMEOUT_MS,
    ) -> list[RowResult]:
        budget_s = (batch_timeout_ms / 1000.0) * max(1, math.ceil(len(rows) / 1000))
        deadline_s = KILL_FACTOR * budget_s
        with tempfile.NamedTemporaryFile(
            "w", suffix=".py", delete=False, encoding="utf-8"
        ) as handle:
            handle.write(source)
            snippet_path = Path(handle.name)
        try:
            return self._session(snippet_path, rows, batch_timeout_ms, deadline_s)
        finally:
            snippet_path.unlink(missing_ok=True)

    def _session(
        self,
        snippet_path: Path,
        rows: Sequence[dict[str, str | None]],
        batch_timeout_ms: int,
        deadline_s: float,
    ) -> list[RowResult]:
        command = self.command + [
            "--snippet-file",
            str(snippet_path),
            "--batch-timeout-ms",
            str(batch_timeout_ms),
        ]
        try:
            proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ExecutorError(f"cannot launch runner {command[0]!r}: {exc}") from exc

        lines: queue.Queue = queue.Queue()

        def _pump():
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)

        reader = threading.Thread(target=_pump, daemon=True)
        reader.start()

        def _fail(message: str) -> ExecutorError:
            proc.kill()
            proc.wait()
            return ExecutorError(message)

        try:
            ready_line = lines.get(timeout=READY_TIMEOUT_S)
        except queue.Empty:
            raise _fail("runner produced no ready line within 3 s")
        if ready_line is None:
            stderr = proc.stderr.read() if proc.stderr else ""
            code = proc.wait()
            raise ExecutorError(f"runner exited (code {code}) before ready: {stderr.strip()}")
        try:
            ready = json.loads(ready_line)
        except json.JSONDecodeError:
            raise _fail(f"malformed ready line: {ready_line!r}")
        if ready.get("fatal"):
            proc.wait()
            raise ExecutorError(f"snippet failed to load in runner: {ready['fatal']}")
        if ready.get("ready") is not True or ready.get("protocol") != PROTOCOL_VERSION:
            raise _fail(f"protocol mismatch in ready line: {ready_line.strip()}")

        def _feed():
            try:
                for i, row in enumerate(rows):
                    proc.stdin.write(json.dumps({"id": i, "row": row}) + "\n")
                proc.stdin.close()
            except (BrokenPipeError, OSError, ValueError):
                pass

        writer = threading.Thread(target=_feed, daemon=True)
        writer.start()

        results: list[RowResult] = []
        import time as _time

        session_start = _time.monotonic()
        for expected_id in range(len(rows)):
            remaining = deadline_s - (_time.monotonic() - session_start)
            if remaining <= 0:
                raise _fail(f"batch budget exceeded after {len(results)} rows; runner killed")
            try:
                line = lines.get(timeout=remaining)
            except queue.Empty:
                raise _fail(f"batch budget exceeded after {len(results)} rows; runner killed")
            if line is None:
                raise _fail(f"runner closed stream after {len(results)} of {len(rows)} rows")
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                raise _fail(f"malformed result line: {line!r}")
            if message.get("id") != expected_id:
                raise _fail(f"result id {message.get('id')} out of order, expected {expected_id}")
            if "error" in message:
                results.append(RowResult(id=expected_id, error=str(message["error"])))
            else:
                results.append(RowResult(id=expected_id, value=str(message.get("value", ""))))
        writer.join(timeout=1.0)
        proc.wait(timeout=deadline_s)
        return results
