"""Command-line surface: run wrangling jobs, compare reports, manage the KB."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import JobConfig, build_job_config, load_config_file
from .errors import ConfigError, TableError, WrangleTaskError
from .executor import InProcessExecutor, SubprocessExecutor
from .gateway import ModelGateway, configure_backend
from .kb import ingest_kb, read_signature_cache, write_signature_cache
from .orchestrator import TaskSpec, run_rowwise_baseline, run_task
from .tabular import Table, load_table, write_table

EXIT_OK = 0
EXIT_TASK_FAILED = 1
EXIT_CONFIG = 64

TASK_TITLES = {"impute": "Imputation", "detect": "Error Detection", "correct": "Error Correction"}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tablemender",
        description="Impute, detect, and correct tabular data with generated snippets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a wrangling task")
    run.add_argument("--task", choices=("impute", "detect", "correct"))
    run.add_argument("--target")
    run.add_argument("--data", type=Path)
    run.add_argument("--annotations", type=Path)
    run.add_argument("--kb", type=Path)
    run.add_argument("--backend", help="replay:<fixture.json> | scripted:<rules.json> | http")
    run.add_argument("--mode", choices=("codegen", "row_wise_baseline"))
    run.add_argument("--config", type=Path)
    run.add_argument("--out", type=Path)
    run.add_argument("--report", type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--k-folds", type=int, dest="k_folds")
    run.add_argument("--max-iterations", type=int, dest="max_iterations")
    run.add_argument("--threshold", type=float)

    eval_cmd = sub.add_parser("eval", help="compare two run reports side by side")
    eval_cmd.add_argument("report_a", type=Path)
    eval_cmd.add_argument("report_b", type=Path)

    kb = sub.add_parser("kb", help="manage the knowledge base")
    kb.add_argument("action", choices=("ingest", "list"))
    kb.add_argument("dir", type=Path)
    return parser


def _make_backend(job: JobConfig):
    spec = job.backend
    if spec == "http":
        settings = dict(job.model_settings)
        if "name" in settings:  # config key model.name -> backend model id
            settings.setdefault("model", settings.pop("name"))
        return configure_backend("http", settings)
    if ":" in spec:
        kind, _, path = spec.partition(":")
        if kind in ("replay", "scripted"):
            return configure_backend(kind, {"path": path})
    raise ConfigError(f"unusable --backend value {spec!r}")


def _make_executor(job: JobConfig):
    if job.executor_mode == "subprocess":
        return SubprocessExecutor(job.executor_command or None)
    if job.executor_mode == "inprocess":
        return InProcessExecutor()
    raise ConfigError(f"unknown executor.mode {job.executor_mode!r}")


def _write_report(report_dict: dict, path: Path) -> None:
    path.write_text(json.dumps(report_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    flags = {
        key: getattr(args, key)
        for key in (
            "task", "target", "data", "annotations", "kb", "backend", "mode",
            "out", "report", "seed", "k_folds", "max_iterations", "threshold",
        )
    }
    config = load_config_file(args.config) if args.config else {}
    job = build_job_config(flags, config)

    d = load_table(job.data)
    annotations: Table | None = (
        load_table(job.annotations) if job.annotations is not None else None
    )
    kb_entries = []
    kb_warnings: list[str] = []
    if job.kb_dir is not None:
        ingest = ingest_kb(job.kb_dir)
        kb_entries = ingest.entries
        kb_warnings = ingest.warnings

    gateway = ModelGateway(_make_backend(job))
    executor = _make_executor(job)
    spec = TaskSpec(
        task_kind=job.task,
        target=job.target,
        k_folds=job.k_folds,
        max_iterations=job.max_iterations,
        accuracy_gate=job.accuracy_gate,
        n_example_rows=job.n_example_rows,
        fewshot_count=job.fewshot_count,
        seed=job.seed,
    )

    try:
        if job.mode == "row_wise_baseline":
            output, report = run_rowwise_baseline(d, spec, gateway, annotations)
        else:
            output, report = run_task(
                d, spec, kb_entries, gateway, executor, annotations, job.threshold
            )
    except WrangleTaskError as exc:
        if exc.report is not None:
            payload = exc.report.to_dict()
            payload["warnings"] = payload.get("warnings", []) + kb_warnings
            _write_report(payload, job.report)
        print(f"task failed: {exc}", file=sys.stderr)
        return EXIT_TASK_FAILED

    payload = report.to_dict()
    payload["warnings"] = payload.get("warnings", []) + kb_warnings
    write_table(output, job.out)
    _write_report(payload, job.report)
    print(
        f"{TASK_TITLES[job.task]} on {report.dataset}: "
        f"accuracy={_fmt_accuracy(report.accuracy)} llm_calls={report.llm_calls} "
        f"-> {job.out}, {job.report}"
    )
    return EXIT_OK


def _fmt_accuracy(accuracy: float | None) -> str:
    return "n/a" if accuracy is None else f"{accuracy:.2f}"


def _cell(report: dict) -> str:
    accuracy = report.get("accuracy")
    calls = report.get("llm_calls", 0)
    if accuracy is None:
        return f"n/a (#{calls})"
    return f"{accuracy:.2f} (#{calls})"


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        report_a = json.loads(args.report_a.read_text(encoding="utf-8"))
        report_b = json.loads(args.report_b.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load reports: {exc}") from exc
    for key in ("dataset", "task_kind"):
        if report_a.get(key) != report_b.get(key):
            raise ConfigError(
                f"reports disagree on {key}: {report_a.get(key)!r} vs {report_b.get(key)!r}"
            )
    task = TASK_TITLES.get(report_a.get("task_kind", ""), report_a.get("task_kind", "?"))
    header = f"{'Task':<18}{'Dataset':<16}{report_a.get('mode', 'a'):<24}{report_b.get('mode', 'b')}"
    row = f"{task:<18}{report_a.get('dataset', '?'):<16}{_cell(report_a):<24}{_cell(report_b)}"
    print(header)
    print(row)
    return EXIT_OK


def cmd_kb(args: argparse.Namespace) -> int:
    if args.action == "ingest":
        result = ingest_kb(args.dir)
        write_signature_cache(result.entries, args.dir)
        print(f"{len(result.entries)} entries, {len(result.warnings)} warnings")
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        return EXIT_OK
    entries = read_signature_cache(args.dir)
    if not entries:
        ingest = ingest_kb(args.dir)
        entries = [
            {"id": e.id, "columns": list(e.table.columns), "row_count": e.table.row_count}
            for e in ingest.entries
        ]
    for entry in entries:
        print(f"{entry['id']}: {len(entry['columns'])} columns, {entry.get('row_count', '?')} rows")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_kb(args)
    except (ConfigError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
