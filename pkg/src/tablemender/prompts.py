"""Prompt assembly and response parsing for the code-generation loop.

Prompts are built from up to five fixed-order sections; templates live as text
resources next to this module and golden-file tests pin the rendered output.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .orchestrator import TaskSpec

TASK_KINDS = ("impute", "detect", "correct")
SECTION_ORDER = (
    "TaskDescription",
    "FunctionBehavior",
    "ExampleData",
    "ExampleCode",
    "ReferenceTable",
)
_SECTION_TITLES = {
    "TaskDescription": "Task Description",
    "FunctionBehavior": "Function Behavior",
    "ExampleData": "Example Data",
    "ExampleCode": "Example Code",
    "ReferenceTable": "Reference Table",
}

ENTRY_POINT = "transform"
UNKNOWN = "Unknown"
DEFAULT_TOKEN_LIMIT = 8000  # estimated tokens; sized for an 8k-context model

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_TRANSFORM_DEF_RE = re.compile(r"(?m)^\s*def\s+transform\s*\(")


def _template(name: str) -> str:
    return (
        resources.files(__package__).joinpath("templates", f"{name}.txt")
        .read_text(encoding="utf-8")
        .rstrip("\n")
    )


@dataclass(frozen=True)
class Snippet:
    """A generated transformation program plus its provenance and score."""

    source: str
    entry_point: str = ENTRY_POINT
    fold_id: int = -1
    iteration: int = 1
    method: str = "row_alone"  # row_alone | few_shot | memory_dependent
    validation_accuracy: float | None = None

    def with_accuracy(self, accuracy: float) -> "Snippet":
        return replace(self, validation_accuracy=accuracy)


@dataclass(frozen=True)
class PromptBundle:
    task_kind: str
    sections: tuple[tuple[str, str], ...]  # (label, text) in SECTION_ORDER
    token_estimate: int = field(default=0)

    def section(self, label: str) -> str | None:
        for name, text in self.sections:
            if name == label:
                return text
        return None

    def render(self) -> str:
        parts = [f"### {_SECTION_TITLES[label]}\n{text}" for label, text in self.sections]
        return "\n\n".join(parts)


def _estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def _bundle(task_kind: str, sections: list[tuple[str, str]], token_limit: int) -> PromptBundle:
    order = {label: i for i, label in enumerate(SECTION_ORDER)}
    sections = sorted(sections, key=lambda s: order[s[0]])
    # Size guard: shed trailing rows from the bulky sections, reference first.
    for label in ("ReferenceTable", "ExampleData"):
        while True:
            rendered = PromptBundle(task_kind, tuple(sections)).render()
            if _estimate_tokens(rendered) <= token_limit:
                break
            index = next((i for i, s in enumerate(sections) if s[0] == label), None)
            if index is None:
                break
            lines = sections[index][1].split("\n")
            if len(lines) <= 2:
                break
            sections[index] = (label, "\n".join(lines[:-1]))
    rendered = PromptBundle(task_kind, tuple(sections)).render()
    return PromptBundle(task_kind, tuple(sections), _estimate_tokens(rendered))


def build_prompt(
    spec: "TaskSpec",
    example_rows: str,
    best_code: Snippet | None = None,
    reference_sample: str | None = None,
    iteration: int = 1,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
) -> PromptBundle:
    """Assemble the code-generation prompt for one iteration.

    The first iteration carries instructions and example rows only; later
    iterations add the most effective code so far, and memory-dependent runs
    append a sample of the retrieved reference table.
    """
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    if spec.task_kind not in TASK_KINDS:
        raise ValueError(f"unknown task kind {spec.task_kind!r}")
    sections = [
        ("TaskDescription", _template(f"task_{spec.task_kind}").format(target=spec.target)),
        ("FunctionBehavior", _template(f"behavior_{spec.task_kind}").format(target=spec.target)),
        ("ExampleData", example_rows),
    ]
    if iteration > 1 and best_code is not None:
        sections.append(("ExampleCode", best_code.source))
    if reference_sample is not None:
        sections.append(("ReferenceTable", reference_sample))
    return _bundle(spec.task_kind, sections, token_limit)


def build_rowwise_prompt(
    spec: "TaskSpec",
    row: dict[str, str | None],
    fewshot_rows: str,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
) -> PromptBundle:
    """One-row query prompt for the per-row baseline: answer with the value only."""
    from .tabular import format_record  # local import avoids a module cycle

    if spec.task_kind not in TASK_KINDS:
        raise ValueError(f"unknown task kind {spec.task_kind!r}")
    row_text = format_record(list(row.values()))
    behavior = "rowwise_behavior_detect" if spec.task_kind == "detect" else "rowwise_behavior_value"
    sections = [
        (
            "TaskDescription",
            _template(f"rowwise_task_{spec.task_kind}").format(target=spec.target, row=row_text),
        ),
        ("FunctionBehavior", _template(behavior).format(target=spec.target)),
        ("ExampleData", fewshot_rows),
    ]
    return _bundle(spec.task_kind, sections, token_limit)


def parse_code(response: str) -> str | None:
    """Extract snippet source from a model response.

    Fenced blocks win: the first fenced block defining ``transform`` is
    returned. Without fences, everything from the first ``def transform``
    line onward is taken. Anything else parses to None.
    """
    blocks = _FENCE_RE.findall(response)
    if blocks:
        for block in blocks:
            if _TRANSFORM_DEF_RE.search(block):
                return block.strip("\n")
        return None
    match = _TRANSFORM_DEF_RE.search(response)
    if match:
        return response[match.start() :].strip("\n")
    return None
