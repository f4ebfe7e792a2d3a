"""Job configuration: config-file values overridden by CLI flags.

Config documents are JSON or TOML; every CLI flag has a config equivalent
(dotted keys for the kb/model/executor groups, flat keys otherwise).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):  # pragma: no cover
    import tomllib
else:
    import tomli as tomllib

TASK_KINDS = ("impute", "detect", "correct")
MODES = ("codegen", "row_wise_baseline")


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with path.open("rb") as handle:
                return tomllib.load(handle)
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def lookup(config: dict, dotted: str, default=None):
    node = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


@dataclass
class JobConfig:
    task: str
    target: str
    data: Path
    backend: str
    mode: str = "codegen"
    annotations: Path | None = None
    kb_dir: Path | None = None
    out: Path | None = None
    report: Path | None = None
    seed: int = 0
    k_folds: int = 5
    max_iterations: int = 3
    threshold: float = 0.75
    accuracy_gate: float = 0.9
    n_example_rows: int = 10
    fewshot_count: int = 5
    model_settings: dict = field(default_factory=dict)
    executor_mode: str = "inprocess"  # inprocess | subprocess
    executor_command: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.task not in TASK_KINDS:
            raise ConfigError(f"--task must be one of {TASK_KINDS}, got {self.task!r}")
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {MODES}, got {self.mode!r}")
        if self.task == "detect" and self.annotations is None:
            raise ConfigError("detect tasks require --annotations")
        if not self.data.is_file():
            raise ConfigError(f"dataset {self.data} is not a readable file")
        if self.annotations is not None and not self.annotations.is_file():
            raise ConfigError(f"annotations {self.annotations} is not a readable file")
        if self.kb_dir is not None and not self.kb_dir.is_dir():
            raise ConfigError(f"KB directory {self.kb_dir} does not exist")
        if self.out is None:
            self.out = Path(f"{self.data.stem}.wrangled.csv")
        if self.report is None:
            self.report = Path(f"{self.data.stem}.report.json")


# flag name -> (config key, converter)
_FLAG_KEYS = {
    "task": ("task", str),
    "target": ("target", str),
    "data": ("data", Path),
    "annotations": ("annotations", Path),
    "kb": ("kb.dir", Path),
    "backend": ("backend", str),
    "mode": ("mode", str),
    "out": ("out", Path),
    "report": ("report", Path),
    "seed": ("seed", int),
    "k_folds": ("k_folds", int),
    "max_iterations": ("max_iterations", int),
    "threshold": ("kb.similarity_threshold", float),
}


def build_job_config(flags: dict, config: dict) -> JobConfig:
    """Merge a parsed config document with CLI flags; flags win."""

    def value(flag: str, default=None):
        if flags.get(flag) is not None:
            return flags[flag]
        key, convert = _FLAG_KEYS[flag]
        raw = lookup(config, key)
        return convert(raw) if raw is not None else default

    required = {}
    for flag in ("task", "target", "data", "backend"):
        resolved = value(flag)
        if resolved is None:
            raise ConfigError(f"missing required option --{flag.replace('_', '-')}")
        required[flag] = resolved

    return JobConfig(
        task=str(required["task"]),
        target=str(required["target"]),
        data=Path(required["data"]),
        backend=str(required["backend"]),
        mode=str(value("mode", "codegen")),
        annotations=value("annotations"),
        kb_dir=value("kb"),
        out=value("out"),
        report=value("report"),
        seed=int(value("seed", 0)),
        k_folds=int(value("k_folds", 5)),
        max_iterations=int(value("max_iterations", 3)),
        threshold=float(value("threshold", 0.75)),
        accuracy_gate=float(lookup(config, "accuracy_gate", 0.9)),
        n_example_rows=int(lookup(config, "n_example_rows", 10)),
        fewshot_count=int(lookup(config, "fewshot_count", 5)),
        model_settings=dict(lookup(config, "model", {}) or {}),
        executor_mode=str(lookup(config, "executor.mode", "inprocess")),
        executor_command=list(lookup(config, "executor.command", []) or []),
    )
