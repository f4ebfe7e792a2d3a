"""Tabular core: loading, profiling, ground truth, folds, serialization."""

from __future__ import annotations

import csv
import io
import uuid

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tablemender.errors import TableError
from tablemender.orchestrator import TaskSpec
from tablemender.tabular import (
    DEFAULT_NULL_TOKENS,
    FoldPlan,
    Table,
    format_rows,
    ground_truth,
    load_table,
    make_folds,
    profile_columns,
    write_table,
)

from .conftest import build_annotations, build_stores_table


def _table(columns, rows, name="t"):
    return Table(name, tuple(columns), tuple(tuple(r) for r in rows))


class TestTableInvariants:
    def test_duplicate_columns_rejected(self):
        with pytest.raises(TableError, match="duplicate"):
            _table(["a", "a"], [])

    def test_ragged_row_rejected(self):
        with pytest.raises(TableError, match="cells"):
            _table(["a", "b"], [("1",)])

    def test_empty_column_name_rejected(self):
        with pytest.raises(TableError):
            _table(["a", ""], [])


class TestLoadTable:
    def test_semicolon_csv_with_empty_null_cell(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a;b\n1;\n2;x\n", encoding="utf-8")
        t = load_table(path)
        assert t.row_count == 2
        assert t.cell(0, "b") is None
        assert t.cell(1, "b") == "x"
        assert t.cell(0, "a") == "1"

    def test_duplicate_header_errors(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,a\n1,2\n", encoding="utf-8")
        with pytest.raises(TableError, match="duplicate"):
            load_table(path)

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n3\n", encoding="utf-8")
        with pytest.raises(TableError, match="line 3"):
            load_table(path)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(TableError, match="cannot read"):
            load_table(tmp_path / "missing.csv")

    def test_null_tokens_trimmed_case_sensitive(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c,d\nNA, N/A ,na,NaN\n", encoding="utf-8")
        t = load_table(path)
        assert t.rows[0] == (None, None, "na", None)

    def test_tab_delimiter_sniffed(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a\tb\n1\t2\n", encoding="utf-8")
        t = load_table(path)
        assert t.columns == ("a", "b")
        assert t.rows[0] == ("1", "2")

    def test_thousand_row_fixture_counts(self, tmp_path):
        table, truth = build_stores_table()
        path = tmp_path / "stores.csv"
        write_table(table, path)
        # independent oracle: physical line count minus the header
        raw_lines = path.read_text(encoding="utf-8").strip("\n").split("\n")
        assert len(raw_lines) - 1 == 1000
        loaded = load_table(path)
        assert loaded.row_count == 1000
        assert sum(1 for v in loaded.column_values("service_24h") if v is None) == len(truth)
        profile_columns(loaded)  # recomputable without error


class TestRoundTrip:
    SAFE_TEXT = st.text(
        alphabet=st.characters(
            whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" .-_"
        ),
        min_size=0,
        max_size=12,
    )

    @given(
        columns=st.lists(
            st.text(
                alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd")),
                min_size=1,
                max_size=8,
            ),
            min_size=1,
            max_size=5,
            unique=True,
        ),
        data=st.data(),
    )
    @settings(max_examples=50, deadline=None)
    def test_write_then_load_recovers_table(self, tmp_path_factory, columns, data):
        n_rows = data.draw(st.integers(min_value=0, max_value=6))
        rows = []
        for _ in range(n_rows):
            cells = []
            for _ in columns:
                cell = data.draw(st.one_of(st.none(), self.SAFE_TEXT))
                # skip values the loader would interpret as null
                if cell is not None and cell.strip() in DEFAULT_NULL_TOKENS:
                    cell = cell + "x"
                cells.append(cell)
            rows.append(tuple(cells))
        t = _table(columns, rows)
        path = tmp_path_factory.mktemp("rt") / "t.csv"
        write_table(t, path)
        assert load_table(path, name="t") == t


class TestProfileColumns:
    def test_numeric_column(self):
        t = _table(["x"], [("1",), ("2",), ("3",)])
        [p] = profile_columns(t)
        assert p.inferred_kind == "numeric"
        assert p.null_fraction == 0.0
        assert p.distinct_count == 3

    def test_datetime_hhmm_with_null(self):
        t = _table(["x"], [("00:00",), ("09:30",), (None,)])
        [p] = profile_columns(t)
        assert p.inferred_kind == "datetime"
        assert p.null_fraction == pytest.approx(1 / 3)

    def test_iso_dates(self):
        t = _table(["x"], [("2021-05-01",), ("2022-11-30",)])
        assert profile_columns(t)[0].inferred_kind == "datetime"

    def test_uuid_column_is_text(self):
        rows = [(str(uuid.UUID(int=i)),) for i in range(1000)]
        t = _table(["x"], rows)
        [p] = profile_columns(t)
        assert p.inferred_kind == "text"
        assert p.distinct_count == 1000

    def test_small_distinct_is_categorical(self):
        rows = [(f"v{i % 4}",) for i in range(100)]
        assert profile_columns(_table(["x"], rows))[0].inferred_kind == "categorical"

    def test_empty_table_errors(self):
        with pytest.raises(TableError, match="empty"):
            profile_columns(_table(["x"], []))

    def test_order_insensitive(self):
        rows = [(str(i % 7),) for i in range(50)]
        a = profile_columns(_table(["x"], rows))
        b = profile_columns(_table(["x"], list(reversed(rows))))
        assert a == b


class TestGroundTruth:
    def test_impute_keeps_non_null_target(self):
        table, truth = build_stores_table(n_rows=1000, n_nulls=50)
        spec = TaskSpec(task_kind="impute", target="service_24h")
        g = ground_truth(table, spec)
        assert g.row_count == 950
        assert all(v is not None for v in g.column_values("service_24h"))

    def test_detect_joins_annotations(self):
        table, _ = build_stores_table(n_rows=100, n_nulls=0)
        annotations = build_annotations({i: "Yes" for i in range(22)}, list(range(22, 40)))
        spec = TaskSpec(task_kind="detect", target="service_24h")
        g = ground_truth(table, spec, annotations)
        assert g.row_count == 40
        labels = g.column_values("label")
        assert labels.count("Yes") == 22 and labels.count("No") == 18

    def test_detect_rejects_bad_label(self):
        table, _ = build_stores_table(n_rows=10, n_nulls=0)
        bad = _table(["row_index", "label"], [("0", "maybe")])
        spec = TaskSpec(task_kind="detect", target="service_24h")
        with pytest.raises(TableError, match="maybe"):
            ground_truth(table, spec, bad)

    def test_detect_requires_annotations(self):
        table, _ = build_stores_table(n_rows=10, n_nulls=0)
        spec = TaskSpec(task_kind="detect", target="service_24h")
        with pytest.raises(TableError, match="annotations"):
            ground_truth(table, spec)

    def test_empty_ground_truth_errors(self):
        t = _table(["a", "b"], [("1", None), ("2", None)])
        spec = TaskSpec(task_kind="impute", target="b")
        with pytest.raises(TableError, match="non-null"):
            ground_truth(t, spec)


class TestMakeFolds:
    def _rows(self, n):
        return _table(["x"], [(str(i),) for i in range(n)])

    def test_even_split(self):
        plan = make_folds(self._rows(10), k=5, seed=7)
        sizes = [len(plan.fold_indices(f)) for f in range(5)]
        assert sizes == [2, 2, 2, 2, 2]

    def test_uneven_split(self):
        plan = make_folds(self._rows(11), k=5, seed=7)
        sizes = sorted(len(plan.fold_indices(f)) for f in range(5))
        assert sizes == [2, 2, 2, 2, 3]

    def test_deterministic(self):
        a = make_folds(self._rows(37), k=4, seed=123)
        b = make_folds(self._rows(37), k=4, seed=123)
        assert a == b

    def test_seed_changes_assignment(self):
        a = make_folds(self._rows(37), k=4, seed=1)
        b = make_folds(self._rows(37), k=4, seed=2)
        assert a.assignments != b.assignments

    def test_too_few_rows(self):
        with pytest.raises(TableError):
            make_folds(self._rows(3), k=5, seed=0)

    def test_k_below_two(self):
        with pytest.raises(TableError):
            make_folds(self._rows(10), k=1, seed=0)

    @given(
        n=st.integers(min_value=2, max_value=200),
        k=st.integers(min_value=2, max_value=10),
        seed=st.integers(min_value=0, max_value=2**63 - 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_partition_property(self, n, k, seed):
        if n < k:
            return
        plan = make_folds(self._rows(n), k=k, seed=seed)
        assert len(plan.assignments) == n
        sizes = [len(plan.fold_indices(f)) for f in range(k)]
        assert sum(sizes) == n
        assert max(sizes) - min(sizes) <= 1


class TestFormatRows:
    def test_null_renders_empty(self):
        t = _table(["x", "y"], [("a", "b"), ("c", None)])
        assert format_rows(t, [0, 1]) == "a;b\nc;"

    def test_header_only(self):
        t = _table(["x", "y"], [("a", "b")])
        assert format_rows(t, [], include_header=True) == "x;y"

    def test_semicolon_cell_round_trips(self):
        t = _table(["x", "y"], [("a;1", 'say "hi"')])
        text = format_rows(t, [0])
        parsed = next(csv.reader(io.StringIO(text), delimiter=";"))
        assert parsed == ["a;1", 'say "hi"']

    def test_line_count(self):
        t = _table(["x"], [(str(i),) for i in range(5)])
        assert len(format_rows(t, [0, 2, 4], include_header=True).split("\n")) == 4
        assert len(format_rows(t, [1, 3]).split("\n")) == 2
