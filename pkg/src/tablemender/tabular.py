"""Tabular core: load, profile, slice, fold, and serialize column-named grids.

Cells are nullable strings. Tables are immutable after construction and safe
to share across threads; every operation here is pure or returns fresh values.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass
from datetime import date, datetime, time
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import TableError

if TYPE_CHECKING:  # pragma: no cover
    from .orchestrator import TaskSpec

Cell = "str | None"

DEFAULT_NULL_TOKENS = frozenset({"", "NA", "N/A", "null", "NaN"})

# Prompt serialization is fixed to ";"; input delimiter is sniffed among these.
CANDIDATE_DELIMITERS = (",", ";", "\t")

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_HHMM_RE = re.compile(r"^(\d{1,2}):(\d{2})(:(\d{2}))?$")


@dataclass(frozen=True)
class Table:
    """Immutable column-named grid of nullable string cells."""

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str | None, ...], ...]

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise TableError(f"duplicate column names in table {self.name!r}")
        if any(not c for c in self.columns):
            raise TableError(f"empty column name in table {self.name!r}")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise TableError(
                    f"row {i} of table {self.name!r} has {len(row)} cells, expected {width}"
                )

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def column_index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise TableError(f"no column {column!r} in table {self.name!r}") from None

    def column_values(self, column: str) -> tuple[str | None, ...]:
        j = self.column_index(column)
        return tuple(row[j] for row in self.rows)

    def cell(self, row_index: int, column: str) -> str | None:
        return self.rows[row_index][self.column_index(column)]

    def row_dict(self, row_index: int) -> dict[str, str | None]:
        return dict(zip(self.columns, self.rows[row_index]))

    def subset_rows(self, row_indices: Iterable[int], name: str | None = None) -> "Table":
        rows = tuple(self.rows[i] for i in row_indices)
        return Table(name if name is not None else self.name, self.columns, rows)

    def select_columns(self, columns: Sequence[str], name: str | None = None) -> "Table":
        idx = [self.column_index(c) for c in columns]
        rows = tuple(tuple(row[j] for j in idx) for row in self.rows)
        return Table(name if name is not None else self.name, tuple(columns), rows)

    def with_column(self, column: str, values: Sequence[str | None]) -> "Table":
        """Replace an existing column or append a new one, returning a fresh table."""
        if len(values) != self.row_count:
            raise TableError(
                f"column {column!r}: {len(values)} values for {self.row_count} rows"
            )
        if column in self.columns:
            j = self.column_index(column)
            rows = tuple(
                row[:j] + (values[i],) + row[j + 1 :] for i, row in enumerate(self.rows)
            )
            return Table(self.name, self.columns, rows)
        rows = tuple(row + (values[i],) for i, row in enumerate(self.rows))
        return Table(self.name, self.columns + (column,), rows)


@dataclass(frozen=True)
class ColumnProfile:
    name: str
    inferred_kind: str  # numeric | categorical | text | datetime
    null_fraction: float
    distinct_count: int


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]  # row index -> fold id
    seed: int

    def fold_indices(self, fold_id: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold_id]

    def complement_indices(self, fold_id: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold_id]


def _sniff_delimiter(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in CANDIDATE_DELIMITERS}
    best = max(counts.values())
    if best == 0:
        return ","
    for d in CANDIDATE_DELIMITERS:  # priority order breaks ties
        if counts[d] == best:
            return d
    return ","


def load_table(
    path: str | Path,
    null_tokens: frozenset[str] | set[str] = DEFAULT_NULL_TOKENS,
    name: str | None = None,
) -> Table:
    """Read a headered CSV into a Table, mapping null tokens to NULL cells.

    Delimiter is sniffed from the header line among ``,``, ``;`` and tab.
    A trimmed cell equal (case-sensitively) to any null token becomes NULL.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise TableError(f"{path}: empty file, expected a header row")
    delimiter = _sniff_delimiter(text.splitlines()[0])
    reader = csv.reader(text.splitlines(True), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise TableError(f"{path}: missing header row") from None
    header = [h.strip() for h in header]
    rows: list[tuple[str | None, ...]] = []
    for record in reader:
        if len(record) != len(header):
            raise TableError(
                f"{path}: line {reader.line_num}: {len(record)} cells, "
                f"expected {len(header)}"
            )
        rows.append(
            tuple(None if cell.strip() in null_tokens else cell for cell in record)
        )
    return Table(name if name is not None else path.stem, tuple(header), tuple(rows))


def write_table(t: Table, path: str | Path) -> None:
    """Write a Table as RFC-4180-style CSV (comma-delimited, UTF-8); NULL as empty."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(t.columns)
        for row in t.rows:
            writer.writerow(["" if cell is None else cell for cell in row])


def _parses_number(cell: str) -> bool:
    return bool(_NUMBER_RE.match(cell.strip()))


def _parses_datetime(cell: str) -> bool:
    stripped = cell.strip()
    match = _HHMM_RE.match(stripped)
    if match:
        hour, minute = int(match.group(1)), int(match.group(2))
        second = int(match.group(4)) if match.group(4) else 0
        return hour < 24 and minute < 60 and second < 60
    for parser in (date.fromisoformat, datetime.fromisoformat, time.fromisoformat):
        try:
            parser(stripped)
            return True
        except ValueError:
            continue
    return False


def profile_columns(t: Table) -> list[ColumnProfile]:
    """Infer per-column kind and null statistics.

    Numeric and datetime require >= 95% of non-null cells to parse; categorical
    requires distinct count <= max(20, 5% of rows); everything else is text.
    """
    if t.row_count == 0:
        raise TableError(f"cannot profile empty table {t.name!r}")
    profiles = []
    cat_cap = max(20, 0.05 * t.row_count)
    for column in t.columns:
        values = [v for v in t.column_values(column) if v is not None]
        nulls = t.row_count - len(values)
        distinct = len(set(values))
        if values and sum(_parses_number(v) for v in values) >= 0.95 * len(values):
            kind = "numeric"
        elif values and sum(_parses_datetime(v) for v in values) >= 0.95 * len(values):
            kind = "datetime"
        elif distinct <= cat_cap:
            kind = "categorical"
        else:
            kind = "text"
        profiles.append(
            ColumnProfile(
                name=column,
                inferred_kind=kind,
                null_fraction=nulls / t.row_count,
                distinct_count=distinct,
            )
        )
    return profiles


ANNOTATION_INDEX_COLUMN = "row_index"
ANNOTATION_LABEL_COLUMN = "label"
DETECT_LABELS = ("Yes", "No")


def ground_truth(t: Table, spec: "TaskSpec", annotations: Table | None = None) -> Table:
    """Rows usable as ground truth for snippet generation and validation.

    Impute/correct keep rows whose target cell is non-NULL. Detect joins the
    user annotations (``row_index``/``label`` columns, labels Yes/No) onto
    their rows and appends the label column.
    """
    if spec.task_kind == "detect":
        if annotations is None:
            raise TableError("detect tasks require an annotations table")
        for required in (ANNOTATION_INDEX_COLUMN, ANNOTATION_LABEL_COLUMN):
            if required not in annotations.columns:
                raise TableError(f"annotations lack required column {required!r}")
        rows = []
        for i in range(annotations.row_count):
            raw_index = annotations.cell(i, ANNOTATION_INDEX_COLUMN)
            label = annotations.cell(i, ANNOTATION_LABEL_COLUMN)
            if label not in DETECT_LABELS:
                raise TableError(
                    f"annotation label {label!r} not in {DETECT_LABELS}"
                )
            try:
                row_index = int(raw_index)
                source = t.rows[row_index]
            except (TypeError, ValueError, IndexError):
                raise TableError(f"annotation row_index {raw_index!r} invalid") from None
            rows.append(source + (label,))
        if not rows:
            raise TableError("detect annotations are empty")
        return Table(
            f"{t.name}:G", t.columns + (ANNOTATION_LABEL_COLUMN,), tuple(rows)
        )

    j = t.column_index(spec.target)
    rows = tuple(row for row in t.rows if row[j] is not None)
    if not rows:
        raise TableError(f"no non-null {spec.target!r} rows to use as ground truth")
    return Table(f"{t.name}:G", t.columns, rows)


def make_folds(g: Table, k: int, seed: int) -> FoldPlan:
    """Partition row indices into k folds via a seeded shuffle; sizes differ by <= 1."""
    if k < 2:
        raise TableError(f"k must be >= 2, got {k}")
    if g.row_count < k:
        raise TableError(f"{g.row_count} rows cannot fill {k} folds")
    order = list(range(g.row_count))
    random.Random(seed).shuffle(order)
    assignments = [0] * g.row_count
    base, remainder = divmod(g.row_count, k)
    cursor = 0
    for fold in range(k):
        size = base + (1 if fold < remainder else 0)
        for row in order[cursor : cursor + size]:
            assignments[row] = fold
        cursor += size
    return FoldPlan(k=k, assignments=tuple(assignments), seed=seed)


def _format_cell(cell: str | None) -> str:
    if cell is None:
        return ""
    if ";" in cell or '"' in cell or "\n" in cell or "\r" in cell:
        return '"' + cell.replace('"', '""') + '"'
    return cell


def format_record(cells: Sequence[str | None]) -> str:
    """One serialized line: cells joined by ";", NULL rendered empty.

    Cells containing ";", a quote, or a newline get minimal double-quote
    wrapping so the output parses back unambiguously.
    """
    return ";".join(_format_cell(cell) for cell in cells)


def format_rows(t: Table, row_indices: Sequence[int], include_header: bool = False) -> str:
    """Serialize rows one per line in prompt format; header line first if asked."""
    lines = []
    if include_header:
        lines.append(format_record(t.columns))
    for i in row_indices:
        lines.append(format_record(t.rows[i]))
    return "\n".join(lines)
