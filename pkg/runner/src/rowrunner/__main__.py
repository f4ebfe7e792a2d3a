"""Protocol v1 entry point: JSON Lines on stdin/stdout, diagnostics on stderr.

Exit codes: 0 clean session, 2 snippet load failure, 3 protocol violation.
The wall-clock batch budget is enforced by the orchestrator killing the
process; the runner reports budget overruns on stderr as it notices them.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .session import (
    BATCH_SIZE,
    DEFAULT_BATCH_TIMEOUT_MS,
    PROTOCOL_VERSION,
    ProtocolViolation,
    SnippetLoadError,
    load_transform,
    parse_row_message,
    coerce_value,
)

EXIT_OK = 0
EXIT_LOAD_FAILURE = 2
EXIT_PROTOCOL = 3


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")
    sys.stdout.flush()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="rowrunner")
    parser.add_argument("--snippet-file", required=True)
    parser.add_argument(
        "--batch-timeout-ms", type=int, default=DEFAULT_BATCH_TIMEOUT_MS
    )
    args = parser.parse_args(argv)

    try:
        with open(args.snippet_file, encoding="utf-8") as handle:
            source = handle.read()
        transform = load_transform(source)
    except (OSError, SnippetLoadError) as exc:
        _emit({"fatal": str(exc)})
        return EXIT_LOAD_FAILURE

    _emit({"ready": True, "protocol": PROTOCOL_VERSION})

    budget_s = args.batch_timeout_ms / 1000.0
    batch_started = time.monotonic()
    processed = 0
    last_id: int | None = None
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            row_id, row = parse_row_message(payload, last_id)
        except (json.JSONDecodeError, ProtocolViolation) as exc:
            print(f"protocol violation: {exc}", file=sys.stderr)
            return EXIT_PROTOCOL
        last_id = row_id
        try:
            value = transform(row)
        except Exception as exc:
            _emit({"id": row_id, "error": f"{type(exc).__name__}: {exc}"})
        else:
            _emit({"id": row_id, "value": coerce_value(value)})
        processed += 1
        if processed % BATCH_SIZE == 0:
            elapsed = time.monotonic() - batch_started
            if elapsed > budget_s:
                print(
                    f"batch of {BATCH_SIZE} took {elapsed:.2f}s, budget {budget_s:.2f}s",
                    file=sys.stderr,
                )
            batch_started = time.monotonic()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
