"""Shared fixtures: synthetic datasets with known generating rules, canned backends."""

from __future__ import annotations

import random

import pytest

from tablemender.gateway import CompletionRequest
from tablemender.tabular import Table

STORES_COLUMNS = ("store_id", "city", "open_time", "close_time", "service_24h")
TARGET = "service_24h"

STORES_RULE_SNIPPET = '''def transform(row):
    open_time = row.get("open_time")
    close_time = row.get("close_time")
    if open_time is None or close_time is None:
        return "Unknown"
    if open_time == "00:00" and close_time == "00:00":
        return "Yes"
    return "No"'''

DETECT_RULE_SNIPPET = '''def transform(row):
    open_time = row.get("open_time")
    close_time = row.get("close_time")
    value = row.get("service_24h")
    if open_time is None or close_time is None or value is None:
        return "Unknown"
    expected = "Yes" if open_time == "00:00" and close_time == "00:00" else "No"
    return "No" if value == expected else "Yes"'''


def fenced(code: str) -> str:
    return f"Here is the function.\n\n```python\n{code}\n```\n"


def stores_rule(open_time: str, close_time: str) -> str:
    return "Yes" if open_time == "00:00" and close_time == "00:00" else "No"


def build_stores_table(
    n_rows: int = 1000, n_nulls: int = 50, seed: int = 11, name: str = "stores"
) -> tuple[Table, dict[int, str]]:
    """Synthetic stores dataset; target follows the two-column midnight rule.

    Returns the table plus the held-back truth for every nulled target cell.
    Both time columns carry partial signal so neither alone decides the label.
    """
    rng = random.Random(seed)
    cities = ["Lisbon", "Porto", "Madrid", "Seville", "Paris", "Lyon", "Berlin", "Rome"]
    opens = ["06:00", "07:00", "07:30", "08:00", "09:00"]
    closes = ["17:00", "18:00", "19:30", "21:00", "22:00"]
    rows: list[tuple] = []
    for i in range(n_rows):
        shape = rng.random()
        if shape < 0.30:
            open_t, close_t = "00:00", "00:00"
        elif shape < 0.40:
            open_t, close_t = "00:00", rng.choice(closes)
        elif shape < 0.50:
            open_t, close_t = rng.choice(opens), "00:00"
        else:
            open_t, close_t = rng.choice(opens), rng.choice(closes)
        label = stores_rule(open_t, close_t)
        rows.append((f"S{i:04d}", rng.choice(cities), open_t, close_t, label))
    truth: dict[int, str] = {}
    for i in rng.sample(range(n_rows), n_nulls):
        truth[i] = rows[i][4]
        rows[i] = rows[i][:4] + (None,)
    return Table(name, STORES_COLUMNS, tuple(rows)), truth


def build_corrupted_stores(
    n_rows: int = 1000, n_corrupt: int = 30, seed: int = 17, name: str = "stores"
) -> tuple[Table, dict[int, str]]:
    """Stores table with target cells flipped; returns corrupted indices -> truth."""
    table, _ = build_stores_table(n_rows=n_rows, n_nulls=0, seed=seed, name=name)
    rows = [list(row) for row in table.rows]
    truth: dict[int, str] = {}
    rng = random.Random(seed + 1)
    for i in rng.sample(range(n_rows), n_corrupt):
        truth[i] = rows[i][4]
        rows[i][4] = "No" if rows[i][4] == "Yes" else "Yes"
    return Table(name, table.columns, tuple(tuple(r) for r in rows)), truth


def build_annotations(corrupted: dict[int, str], clean_indices: list[int]) -> Table:
    rows = [(str(i), "Yes") for i in sorted(corrupted)] + [
        (str(i), "No") for i in clean_indices
    ]
    return Table("annotations", ("row_index", "label"), tuple(rows))


THREE_PATTERNS = (
    ("aurora borealis", "mountain lake", "evergreen forest"),
    ("desert canyon", "sandstone arch", "cactus bloom"),
    ("coral reef", "tidal pool", "kelp forest"),
)


def build_three_pattern_table(copies: int = 100, seed: int = 5) -> Table:
    rows = [THREE_PATTERNS[i % 3] for i in range(3 * copies)]
    random.Random(seed).shuffle(rows)
    return Table("patterns", ("scene", "landmark", "flora"), tuple(rows))


def pattern_class(row: tuple) -> int:
    return THREE_PATTERNS.index(tuple(row))


def build_label_copy_table(
    n_rows: int = 5000, n_noise: int = 20, n_classes: int = 5, seed: int = 3
) -> Table:
    """Target duplicates the "mirror" column; every other column is noise."""
    rng = random.Random(seed)
    classes = [f"class_{i}" for i in range(n_classes)]
    columns = [f"noise_{j:02d}" for j in range(n_noise)]
    columns.insert(n_noise // 2, "mirror")
    columns.append("target")
    rows = []
    for _ in range(n_rows):
        label = rng.choice(classes)
        row = []
        for column in columns:
            if column == "mirror" or column == "target":
                row.append(label)
            else:
                row.append(f"{column}_v{rng.randrange(10)}")
        rows.append(tuple(row))
    return Table("labelcopy", tuple(columns), tuple(rows))


class TagRoutedBackend:
    """Test backend answering by request tag; records every prompt it saw."""

    name = "tag-routed"

    def __init__(self, router):
        self._router = router
        self.prompts: list[tuple[str, str]] = []

    def complete(self, request: CompletionRequest) -> str:
        self.prompts.append((request.tag, request.prompt))
        return self._router(request)


def correct_by_second_iteration_backend() -> TagRoutedBackend:
    """Prose on every fold's first iteration, the correct rule afterwards."""

    def router(request: CompletionRequest) -> str:
        if ":iter1:" in request.tag:
            return "I would inspect the opening hours columns for a pattern."
        return fenced(STORES_RULE_SNIPPET)

    return TagRoutedBackend(router)


@pytest.fixture
def stores_fixture():
    return build_stores_table()


@pytest.fixture
def three_pattern_table():
    return build_three_pattern_table()
