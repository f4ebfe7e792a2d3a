"""Restricted snippet loading and the per-row transform session.

The snippet runs with curated builtins and allowlisted utility modules only:
no file, network, process, or dynamic-eval capability exists in its namespace.
stdout belongs to the protocol, so even print is absent.
"""

from __future__ import annotations

import builtins
from typing import Iterable

PROTOCOL_VERSION = 1
ENTRY_POINT = "transform"
UNKNOWN = "Unknown"
DEFAULT_BATCH_TIMEOUT_MS = 5000
BATCH_SIZE = 1000

ALLOWED_MODULES = ("math", "string", "datetime", "re")

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


class SnippetLoadError(Exception):
    """The snippet source could not be turned into a callable transform."""


class ProtocolViolation(Exception):
    """The input stream broke the message contract."""


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if root not in ALLOWED_MODULES:
        raise ImportError(f"module {name!r} is not available to snippets")
    return builtins.__import__(name, globals, locals, fromlist, level)


def build_namespace() -> dict:
    safe = {name: getattr(builtins, name) for name in _SAFE_BUILTIN_NAMES}
    safe["__import__"] = _guarded_import
    return {"__builtins__": safe, "__name__": "snippet"}


def load_transform(source: str):
    namespace = build_namespace()
    try:
        exec(compile(source, "<snippet>", "exec"), namespace)
    except Exception as exc:
        raise SnippetLoadError(f"{type(exc).__name__}: {exc}") from exc
    transform = namespace.get(ENTRY_POINT)
    if not callable(transform):
        raise SnippetLoadError(f"snippet defines no callable {ENTRY_POINT}(row)")
    return transform


def coerce_value(value) -> str:
    """Canonical string form; the None sentinel is the Unknown abstention."""
    if value is None:
        return UNKNOWN
    if isinstance(value, str):
        return value
    return str(value)


def parse_row_message(payload: dict, last_id: int | None) -> tuple[int, dict]:
    if not isinstance(payload, dict):
        raise ProtocolViolation("message is not an object")
    row_id = payload.get("id")
    row = payload.get("row")
    if not isinstance(row_id, int) or isinstance(row_id, bool) or row_id < 0:
        raise ProtocolViolation(f"bad id {row_id!r}")
    if last_id is not None and row_id <= last_id:
        raise ProtocolViolation(f"id {row_id} not strictly increasing after {last_id}")
    if not isinstance(row, dict):
        raise ProtocolViolation(f"bad row payload for id {row_id}")
    # Protocol nulls become the missing-value sentinel (None); everything
    # else is stringly typed on the wire already.
    cleaned = {str(k): (None if v is None else str(v)) for k, v in row.items()}
    return row_id, cleaned


def run_session(transform, messages: Iterable[dict]) -> Iterable[dict]:
    """Apply transform per RowMessage, yielding one ResultMessage per input in order."""
    last_id: int | None = None
    for payload in messages:
        row_id, row = parse_row_message(payload, last_id)
        last_id = row_id
        try:
            value = transform(row)
        except Exception as exc:
            yield {"id": row_id, "error": f"{type(exc).__name__}: {exc}"}
            continue
        yield {"id": row_id, "value": coerce_value(value)}
