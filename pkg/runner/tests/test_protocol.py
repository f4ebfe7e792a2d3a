"""Subprocess protocol tests: handshake, exit codes, streaming, containment."""

from __future__ import annotations

import json

from .harness import run_runner_session, send_raw_lines

IDENTITY = 'def transform(row):\n    return row.get("x")'


class TestHandshake:
    def test_ready_line_first(self):
        outcome = run_runner_session(IDENTITY, [{"x": "1"}])
        assert outcome.ready == {"ready": True, "protocol": 1}

    def test_load_failure_fatal_then_exit_2(self):
        outcome = run_runner_session("def transform(row) broken ::", [])
        assert outcome.ready is not None and "fatal" in outcome.ready
        assert outcome.exit_code == 2

    def test_unreadable_snippet_exit_2(self):
        import subprocess
        import sys

        proc = subprocess.run(
            [sys.executable, "-m", "rowrunner", "--snippet-file", "/nonexistent.py"],
            capture_output=True,
            text=True,
            timeout=30,
        )
        assert proc.returncode == 2
        assert "fatal" in json.loads(proc.stdout.splitlines()[0])


class TestStreaming:
    def test_order_preserved(self):
        rows = [{"x": str(i)} for i in range(500)]
        outcome = run_runner_session(IDENTITY, rows)
        assert outcome.exit_code == 0
        assert [r["id"] for r in outcome.results] == list(range(500))

    def test_null_cells_and_sentinel_return(self):
        snippet = 'def transform(row):\n    return row.get("x")'
        outcome = run_runner_session(snippet, [{"x": None}])
        assert outcome.results[0] == {"id": 0, "value": "Unknown"}

    def test_non_string_return_coerced(self):
        snippet = 'def transform(row):\n    return len(row)'
        outcome = run_runner_session(snippet, [{"a": "1", "b": "2"}])
        assert outcome.results[0] == {"id": 0, "value": "2"}

    def test_empty_session_exits_clean(self):
        outcome = run_runner_session(IDENTITY, [])
        assert outcome.exit_code == 0
        assert outcome.results == []


class TestProtocolViolations:
    def test_malformed_json_exit_3(self):
        outcome = send_raw_lines(IDENTITY, ['{"id": 0, "row": {}}', "{not json"])
        assert outcome.exit_code == 3

    def test_non_increasing_ids_exit_3(self):
        outcome = send_raw_lines(
            IDENTITY,
            [json.dumps({"id": 1, "row": {}}), json.dumps({"id": 1, "row": {}})],
        )
        assert outcome.exit_code == 3

    def test_missing_row_exit_3(self):
        outcome = send_raw_lines(IDENTITY, [json.dumps({"id": 0})])
        assert outcome.exit_code == 3


class TestContainmentSurface:
    def test_no_filesystem_or_socket_capability(self):
        snippet = (
            "def transform(row):\n"
            '    if row.get("probe") == "open":\n'
            '        return str(open("/etc/hostname").read())\n'
            "    import socket\n"
            "    return 'connected'"
        )
        outcome = run_runner_session(
            snippet, [{"probe": "open"}, {"probe": "socket"}]
        )
        assert outcome.exit_code == 0
        assert "NameError" in outcome.results[0]["error"]
        assert "ImportError" in outcome.results[1]["error"]

    def test_stdout_not_writable_by_snippet(self):
        snippet = (
            "def transform(row):\n"
            "    print('sneaky')\n"
            "    return 'x'"
        )
        outcome = run_runner_session(snippet, [{"a": "1"}])
        # print is not a curated builtin: the row errors, the stream stays clean
        assert "NameError" in outcome.results[0]["error"]

    def test_kill_mid_session_leaves_input_untouched(self):
        rows = [{"x": str(i)} for i in range(10)]
        before = [dict(r) for r in rows]
        stall = "def transform(row):\n    while True:\n        pass"
        outcome = run_runner_session(stall, rows, batch_timeout_ms=300)
        assert outcome.killed
        assert rows == before  # isolation: the feeding side's data is untouched
