"""Target-relevant column selection via a native histogram gradient-boosted tree.

Features are pre-binned into at most 255 value bins (bin 255 reserved for
NULL), then one-vs-rest logistic boosting ranks columns by accumulated split
gain. Prediction quality is the means; the importance ranking is the product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, time, timezone
from typing import Sequence

import numpy as np

from .errors import TableError
from .tabular import ColumnProfile, Table, profile_columns

NULL_BIN = 255
MAX_VALUE_BINS = 255  # value bins occupy 0..254
LAMBDA = 1.0  # L2 regularization in the split gain
GAIN_EPS = 1e-12

CUMULATIVE_SHARE = 0.90
MAX_SELECTED = 8
TARGET_CLASS_CAP = 64


@dataclass(frozen=True)
class GbdtParams:
    rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    min_samples_leaf: int = 20
    seed: int = 0


@dataclass(frozen=True)
class BinnedMatrix:
    n_rows: int
    n_features: int
    feature_names: tuple[str, ...]
    bins: np.ndarray  # (n_rows, n_features) uint8; NULL -> bin 255
    bin_edges: dict[int, np.ndarray]  # numeric/datetime feature -> sorted thresholds
    category_maps: dict[int, dict[str, int]]  # categorical feature -> value -> bin


@dataclass(frozen=True)
class TreeNode:
    """Leaf iff left == -1; split sends ``bin <= threshold`` left (NULL bin right)."""

    feature: int = -1
    threshold: int = -1
    left: int = -1
    right: int = -1
    value: float = 0.0


Tree = "list[TreeNode]"


@dataclass
class BoostModel:
    trees: list[list[list[TreeNode]]]  # [round][class] -> tree
    classes: tuple[str, ...]
    learning_rate: float
    gain_per_feature: np.ndarray
    feature_names: tuple[str, ...]
    train_accuracy: float
    seed: int

    def tree_contribution(self, tree: list[TreeNode], x: BinnedMatrix) -> np.ndarray:
        """Per-row leaf value of one tree (learning rate already folded in)."""
        return _apply_tree(tree, x.bins)

    def raw_scores(self, x: BinnedMatrix) -> np.ndarray:
        raw = np.zeros((x.n_rows, len(self.classes)), dtype=np.float64)
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                raw[:, c] += _apply_tree(tree, x.bins)
        return raw

    def predict(self, x: BinnedMatrix) -> list[str]:
        raw = self.raw_scores(x)
        return [self.classes[i] for i in np.argmax(raw, axis=1)]


@dataclass(frozen=True)
class RelevanceResult:
    target: str
    ranked: tuple[tuple[str, float], ...]  # (column, importance share), descending
    selected: tuple[str, ...]


def _parse_numeric(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def _parse_temporal(cell: str) -> float | None:
    stripped = cell.strip()
    parts = stripped.split(":")
    if 2 <= len(parts) <= 3 and all(p.isdigit() for p in parts):
        hour, minute = int(parts[0]), int(parts[1])
        second = int(parts[2]) if len(parts) == 3 else 0
        if hour < 24 and minute < 60 and second < 60:
            return hour * 60.0 + minute + second / 60.0
    for parser in (datetime.fromisoformat, date.fromisoformat):
        try:
            parsed = parser(stripped)
        except ValueError:
            continue
        if isinstance(parsed, datetime):
            dt = parsed if parsed.tzinfo else parsed.replace(tzinfo=timezone.utc)
        else:
            dt = datetime(parsed.year, parsed.month, parsed.day, tzinfo=timezone.utc)
        return dt.timestamp()
    try:
        t = time.fromisoformat(stripped)
        return t.hour * 60.0 + t.minute + t.second / 60.0
    except ValueError:
        return None


def _bin_numeric_values(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quantile-bin a float array (NaN = missing) into <= 255 bins plus NULL_BIN."""
    finite = values[np.isfinite(values)]
    bins = np.full(values.shape[0], NULL_BIN, dtype=np.uint8)
    if finite.size == 0:
        return bins, np.empty(0)
    distinct = np.unique(finite)
    if distinct.size <= MAX_VALUE_BINS:
        edges = (distinct[:-1] + distinct[1:]) / 2.0
    else:
        quantiles = np.percentile(finite, np.arange(1, MAX_VALUE_BINS) * 100.0 / MAX_VALUE_BINS)
        edges = np.unique(quantiles)
    mask = np.isfinite(values)
    bins[mask] = np.searchsorted(edges, values[mask], side="right").astype(np.uint8)
    return bins, edges


def bin_features(
    t: Table, feature_cols: Sequence[str], profiles: Sequence[ColumnProfile]
) -> BinnedMatrix:
    """Quantile-bin numeric/datetime columns, frequency-bin the rest; NULL -> bin 255."""
    if not feature_cols:
        raise TableError("no usable features to bin")
    kinds = {p.name: p.inferred_kind for p in profiles}
    missing = [c for c in feature_cols if c not in kinds]
    if missing:
        raise TableError(f"profiles missing for features: {missing}")

    bins = np.full((t.row_count, len(feature_cols)), NULL_BIN, dtype=np.uint8)
    bin_edges: dict[int, np.ndarray] = {}
    category_maps: dict[int, dict[str, int]] = {}
    for f, column in enumerate(feature_cols):
        cells = t.column_values(column)
        kind = kinds[column]
        if kind in ("numeric", "datetime"):
            parse = _parse_numeric if kind == "numeric" else _parse_temporal
            values = np.array(
                [np.nan if c is None else _or_nan(parse(c)) for c in cells], dtype=np.float64
            )
            bins[:, f], bin_edges[f] = _bin_numeric_values(values)
        else:
            counts: dict[str, int] = {}
            for c in cells:
                if c is not None:
                    counts[c] = counts.get(c, 0) + 1
            kept = sorted(counts, key=lambda v: (-counts[v], v))[: MAX_VALUE_BINS - 1]
            mapping = {v: i for i, v in enumerate(kept)}
            overflow = len(mapping)
            bins[:, f] = [
                NULL_BIN if c is None else mapping.get(c, overflow) for c in cells
            ]
            category_maps[f] = mapping
    return BinnedMatrix(
        n_rows=t.row_count,
        n_features=len(feature_cols),
        feature_names=tuple(feature_cols),
        bins=np.asfortranarray(bins),
        bin_edges=bin_edges,
        category_maps=category_maps,
    )


def _or_nan(value: float | None) -> float:
    return np.nan if value is None else value


def _apply_tree(tree: list[TreeNode], bins: np.ndarray) -> np.ndarray:
    out = np.zeros(bins.shape[0], dtype=np.float64)
    stack = [(0, np.arange(bins.shape[0], dtype=np.intp))]
    while stack:
        node_id, rows = stack.pop()
        node = tree[node_id]
        if node.left == -1:
            out[rows] = node.value
        else:
            left_mask = bins[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[left_mask]))
            stack.append((node.right, rows[~left_mask]))
    return out


def _grow_tree(
    bins: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    params: GbdtParams,
    gain_per_feature: np.ndarray,
) -> tuple[list[TreeNode], list[tuple[np.ndarray, float]]]:
    """Level-wise histogram tree growth; returns nodes and per-leaf row updates."""
    n_rows, n_features = bins.shape
    nodes: list[TreeNode] = [TreeNode()]
    leaf_updates: list[tuple[np.ndarray, float]] = []
    frontier: list[tuple[int, np.ndarray]] = [(0, np.arange(n_rows, dtype=np.intp))]
    min_leaf = params.min_samples_leaf

    for depth in range(params.max_depth + 1):
        if not frontier:
            break
        can_split = depth < params.max_depth
        level_nodes = len(frontier)
        level_rows = np.concatenate([rows for _, rows in frontier])
        node_of_row = np.repeat(np.arange(level_nodes), [len(rows) for _, rows in frontier])
        keys = node_of_row.astype(np.int64) * 256 + bins[level_rows].astype(np.int64).T
        # keys is (n_features, level_size); one bincount per feature per statistic
        hist_size = level_nodes * 256
        g_level, h_level = g[level_rows], h[level_rows]

        best_gain = np.full(level_nodes, -np.inf)
        best_feature = np.zeros(level_nodes, dtype=np.intp)
        best_threshold = np.zeros(level_nodes, dtype=np.intp)
        totals_g = np.bincount(node_of_row, weights=g_level, minlength=level_nodes)
        totals_h = np.bincount(node_of_row, weights=h_level, minlength=level_nodes)
        totals_c = np.bincount(node_of_row, minlength=level_nodes).astype(np.float64)
        parent_score = totals_g**2 / (totals_h + LAMBDA)

        if can_split:
            for f in range(n_features):
                hist_g = np.bincount(keys[f], weights=g_level, minlength=hist_size).reshape(
                    level_nodes, 256
                )
                hist_h = np.bincount(keys[f], weights=h_level, minlength=hist_size).reshape(
                    level_nodes, 256
                )
                hist_c = np.bincount(keys[f], minlength=hist_size).reshape(level_nodes, 256)
                gl = np.cumsum(hist_g, axis=1)[:, :MAX_VALUE_BINS]
                hl = np.cumsum(hist_h, axis=1)[:, :MAX_VALUE_BINS]
                cl = np.cumsum(hist_c, axis=1)[:, :MAX_VALUE_BINS]
                gr = totals_g[:, None] - gl
                hr = totals_h[:, None] - hl
                cr = totals_c[:, None] - cl
                gain = (
                    gl**2 / (hl + LAMBDA)
                    + gr**2 / (hr + LAMBDA)
                    - parent_score[:, None]
                )
                gain[(cl < min_leaf) | (cr < min_leaf)] = -np.inf
                thresholds = np.argmax(gain, axis=1)
                gains = gain[np.arange(level_nodes), thresholds]
                better = gains > best_gain  # strict: ties keep the earlier feature
                best_gain[better] = gains[better]
                best_feature[better] = f
                best_threshold[better] = thresholds[better]

        next_frontier: list[tuple[int, np.ndarray]] = []
        for i, (node_id, rows) in enumerate(frontier):
            if can_split and best_gain[i] > GAIN_EPS:
                f, thr = int(best_feature[i]), int(best_threshold[i])
                left_mask = bins[rows, f] <= thr
                left_id, right_id = len(nodes), len(nodes) + 1
                nodes.append(TreeNode())
                nodes.append(TreeNode())
                nodes[node_id] = TreeNode(
                    feature=f, threshold=thr, left=left_id, right=right_id
                )
                gain_per_feature[f] += best_gain[i]
                next_frontier.append((left_id, rows[left_mask]))
                next_frontier.append((right_id, rows[~left_mask]))
            else:
                value = float(
                    -totals_g[i] / (totals_h[i] + LAMBDA) * params.learning_rate
                )
                nodes[node_id] = TreeNode(value=value)
                leaf_updates.append((rows, value))
        frontier = next_frontier
    return nodes, leaf_updates


def fit_gbdt(x: BinnedMatrix, y: Sequence[str], params: GbdtParams = GbdtParams()) -> BoostModel:
    """One-vs-rest logistic boosting on histogram splits; deterministic per seed.

    Split gain is G_L^2/(H_L+1) + G_R^2/(H_R+1) - G^2/(H+1); the chosen split's
    gain accrues to its feature, which is what relevance ranking consumes.
    """
    labels = list(y)
    if len(labels) != x.n_rows:
        raise ValueError(f"{len(labels)} labels for {x.n_rows} rows")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError(f"single-class target {classes}; nothing to boost")
    class_pos = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_pos[label] for label in labels], dtype=np.intp)
    onehot = np.zeros((x.n_rows, len(classes)), dtype=np.float64)
    onehot[np.arange(x.n_rows), y_idx] = 1.0

    raw = np.zeros((x.n_rows, len(classes)), dtype=np.float64)
    gain_per_feature = np.zeros(x.n_features, dtype=np.float64)
    all_trees: list[list[list[TreeNode]]] = []
    for _ in range(params.rounds):
        round_trees: list[list[TreeNode]] = []
        round_split = False
        for c in range(len(classes)):
            prob = 0.5 * (1.0 + np.tanh(0.5 * raw[:, c]))  # overflow-safe sigmoid
            grad = prob - onehot[:, c]
            hess = prob * (1.0 - prob)
            tree, leaf_updates = _grow_tree(x.bins, grad, hess, params, gain_per_feature)
            for rows, value in leaf_updates:
                raw[rows, c] += value
            round_trees.append(tree)
            round_split = round_split or len(tree) > 1
        all_trees.append(round_trees)
        if not round_split:
            break

    train_accuracy = float(np.mean(np.argmax(raw, axis=1) == y_idx))
    return BoostModel(
        trees=all_trees,
        classes=classes,
        learning_rate=params.learning_rate,
        gain_per_feature=gain_per_feature,
        feature_names=x.feature_names,
        train_accuracy=train_accuracy,
        seed=params.seed,
    )


def _cap_target_labels(values: Sequence[str]) -> list[str]:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    if len(counts) <= TARGET_CLASS_CAP:
        return list(values)
    kept = set(sorted(counts, key=lambda v: (-counts[v], v))[: TARGET_CLASS_CAP - 1])
    return [v if v in kept else "__other__" for v in values]


def select_relevant_columns(
    t: Table, target: str, params: GbdtParams = GbdtParams()
) -> RelevanceResult:
    """Rank non-target columns by gain importance and keep the dominant prefix.

    Selection takes the smallest prefix reaching cumulative share 0.90, capped
    at 8 columns; with no gain signal it falls back to distinct-count order.
    """
    target_idx = t.column_index(target)
    features = [c for c in t.columns if c != target]
    if not features:
        raise TableError(f"table {t.name!r} has no columns besides the target")
    keep = [i for i, row in enumerate(t.rows) if row[target_idx] is not None]
    if not keep:
        raise TableError(f"target column {target!r} is entirely NULL")
    sub = t.subset_rows(keep)
    profiles = profile_columns(sub)
    labels = _cap_target_labels([v for v in sub.column_values(target)])
    x = bin_features(sub, features, profiles)

    gain = np.zeros(len(features))
    try:
        model = fit_gbdt(x, labels, params)
        gain = model.gain_per_feature
    except ValueError:
        pass  # constant target: fall through to the no-signal ranking

    total = float(gain.sum())
    if total > 0:
        shares = gain / total
        order = sorted(range(len(features)), key=lambda f: (-shares[f], f))
        ranked = tuple((features[f], float(shares[f])) for f in order)
        selected: list[str] = []
        cumulative = 0.0
        for column, share in ranked:
            if cumulative >= CUMULATIVE_SHARE or len(selected) == MAX_SELECTED:
                break
            selected.append(column)
            cumulative += share
    else:
        distinct = {p.name: p.distinct_count for p in profiles}
        order = sorted(range(len(features)), key=lambda f: (-distinct[features[f]], f))
        ranked = tuple((features[f], 0.0) for f in order)
        selected = [column for column, _ in ranked[:MAX_SELECTED]]
    return RelevanceResult(target=target, ranked=ranked, selected=tuple(selected))
