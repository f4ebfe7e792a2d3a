"""End-to-end wrangling workflow: route, generate, validate, execute, vote.

The pipeline filters the dataset to target-relevant columns, routes between
the memory-dependent and memory-independent workflows, runs k-fold iterative
code generation, executes every fold's best snippet, and resolves outputs by
majority consensus. A per-row baseline driver mirrors the costly alternative
for comparison runs.
"""

from __future__ import annotations

import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from hashlib import blake2b

import numpy as np

from .errors import BackendError, ExecutorError, TableError, WrangleTaskError
from .gateway import (
    BASELINE_TEMPERATURE,
    CODEGEN_TEMPERATURE,
    CompletionRequest,
    ModelGateway,
)
from .kb import (
    DEFAULT_SIMILARITY_THRESHOLD,
    KbEntry,
    KbMatch,
    embed_text,
    retrieve_reference,
)
from .prompts import (
    UNKNOWN,
    Snippet,
    build_prompt,
    build_rowwise_prompt,
    parse_code,
)
from .relevance import select_relevant_columns
from .tabular import (
    ANNOTATION_LABEL_COLUMN,
    Table,
    format_rows,
    ground_truth,
    make_folds,
)

log = logging.getLogger(__name__)

TASK_KINDS = ("impute", "detect", "correct")
REFERENCE_SAMPLE_ROWS = 50
KMEANS_MAX_ITERATIONS = 50
KMEANS_TOLERANCE = 1e-6
REPORT_VERSION = 1

# Conservative capability tokens: any hit rejects the snippet outright.
DENYLIST_TOKENS = (
    "eval(", "exec(", "compile(", "open(", "input(", "breakpoint(",
    "__import__", "getattr(", "setattr(", "delattr(", "globals(", "locals(",
    "vars(", "__class__", "__bases__", "__mro__", "__subclasses__",
    "__globals__", "__builtins__", "__code__", "__reduce__",
    "__getattribute__", "__loader__", "__spec__", "__dict__",
)
_IMPORT_RE = re.compile(r"(?m)^\s*(import|from)\s+([^\n#]+)")

from .executor import ALLOWED_SNIPPET_MODULES  # single source for the allowlist


@dataclass(frozen=True)
class TaskSpec:
    task_kind: str  # impute | detect | correct
    target: str
    k_folds: int = 5
    max_iterations: int = 3
    accuracy_gate: float = 0.9
    n_example_rows: int = 10
    fewshot_count: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.task_kind!r}")
        if not 0.0 < self.accuracy_gate <= 1.0:
            raise ValueError(f"accuracy_gate {self.accuracy_gate} outside (0, 1]")
        if self.k_folds < 2:
            raise ValueError(f"k_folds must be >= 2, got {self.k_folds}")


@dataclass(frozen=True)
class RouteDecision:
    mode: str  # memory_dependent | memory_independent
    match: KbMatch | None = None


@dataclass(frozen=True)
class ScanResult:
    ok: bool
    reason: str | None = None


@dataclass
class ConsensusResult:
    per_row: dict[int, tuple[str, int, list[int]]]  # row -> (value, votes, fold ids)
    abstained: set[int]


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class SnippetRecord:
    fold_id: int
    iteration: int
    method: str
    validation_accuracy: float
    applied: bool
    g_accuracy: float | None = None


@dataclass
class WrangleReport:
    task_kind: str
    dataset: str
    target: str
    mode: str  # codegen | row_wise_baseline
    method_used: str
    selected_columns: list[str]
    kb_match: dict | None
    snippets: list[SnippetRecord]
    accuracy: float | None
    llm_calls: int
    abstention_rate: float
    seed: int
    k_folds: int
    max_iterations: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "task_kind": self.task_kind,
            "dataset": self.dataset,
            "target": self.target,
            "mode": self.mode,
            "method_used": self.method_used,
            "selected_columns": list(self.selected_columns),
            "kb_match": self.kb_match,
            "snippets": [
                {
                    "fold_id": s.fold_id,
                    "iteration": s.iteration,
                    "method": s.method,
                    "validation_accuracy": s.validation_accuracy,
                    "applied": s.applied,
                    "g_accuracy": s.g_accuracy,
                }
                for s in self.snippets
            ],
            "accuracy": self.accuracy,
            "llm_calls": self.llm_calls,
            "abstention_rate": self.abstention_rate,
            "seed": self.seed,
            "k_folds": self.k_folds,
            "max_iterations": self.max_iterations,
            "warnings": list(self.warnings),
        }


def derive_seed(seed: int, *tags) -> int:
    """Stable 63-bit sub-seed for independent random streams."""
    text = f"{seed}|" + "|".join(str(t) for t in tags)
    return int.from_bytes(blake2b(text.encode(), digest_size=8).digest(), "big") >> 1


def normalize_value(value: str | None) -> str:
    if value is None:
        return ""
    return " ".join(value.split()).casefold()


def compute_accuracy(predicted: list[str | None], truth: list[str | None]) -> float:
    """Fraction of exact matches after trim/case-fold/whitespace-collapse."""
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} vs {len(truth)}")
    if not predicted:
        raise ValueError("nothing to compare")
    hits = sum(normalize_value(p) == normalize_value(t) for p, t in zip(predicted, truth))
    return hits / len(predicted)


def _import_roots(keyword: str, clause: str) -> list[str]:
    if keyword == "from":
        return [clause.split()[0].split(".")[0]] if clause.split() else []
    roots = []
    for part in clause.split(","):
        tokens = part.strip().split()
        if tokens:
            roots.append(tokens[0].split(".")[0])
    return roots


def safety_scan(source: str) -> ScanResult:
    """Conservative token-level gate run before any snippet reaches an executor."""
    for match in _IMPORT_RE.finditer(source):
        for root in _import_roots(match.group(1), match.group(2)):
            if root not in ALLOWED_SNIPPET_MODULES:
                return ScanResult(False, f"import of {root!r} is not allowed")
    for token in DENYLIST_TOKENS:
        if token in source:
            return ScanResult(False, f"denylisted token {token!r}")
    return ScanResult(True)


def route_workflow(
    d: Table,
    spec: TaskSpec,
    kb: list[KbEntry],
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> RouteDecision:
    """Memory-dependent iff some KB table's similarity strictly exceeds the threshold."""
    match = retrieve_reference(d, kb, threshold)
    if match is not None:
        return RouteDecision(mode="memory_dependent", match=match)
    return RouteDecision(mode="memory_independent")


def _row_signature_matrix(t: Table) -> np.ndarray:
    return np.stack(
        [embed_text(format_rows(t, [i])).values for i in range(t.row_count)]
    )


def _kmeans(vectors: np.ndarray, k: int, seed: int) -> KMeansModel:
    """Seeded k-means++ init plus Lloyd iterations with an inertia tolerance."""
    n = vectors.shape[0]
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, vectors.shape[1]), dtype=np.float64)
    centroids[0] = vectors[int(rng.integers(n))]
    closest_sq = ((vectors - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(closest_sq.sum())
        if total <= 0.0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest_sq / total))
        centroids[j] = vectors[pick]
        closest_sq = np.minimum(closest_sq, ((vectors - centroids[j]) ** 2).sum(axis=1))

    history: list[float] = []
    assignment = np.zeros(n, dtype=np.intp)
    inertia = float("inf")
    for _ in range(KMEANS_MAX_ITERATIONS):
        sq = (
            (vectors**2).sum(axis=1)[:, None]
            + (centroids**2).sum(axis=1)[None, :]
            - 2.0 * vectors @ centroids.T
        )
        np.maximum(sq, 0.0, out=sq)
        assignment = np.argmin(sq, axis=1)
        new_inertia = float(sq[np.arange(n), assignment].sum())
        history.append(new_inertia)
        for j in range(k):
            members = assignment == j
            if members.any():
                centroids[j] = vectors[members].mean(axis=0)
        if abs(inertia - new_inertia) <= KMEANS_TOLERANCE:
            inertia = new_inertia
            break
        inertia = new_inertia
    return KMeansModel(
        k=k, centroids=centroids, assignment=assignment, inertia=inertia,
        inertia_history=history,
    )


def select_diverse_samples(g: Table, count: int, seed: int) -> list[int]:
    """Cluster serialized rows and return the nearest actual row to each centroid."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if g.row_count <= count:
        return list(range(g.row_count))
    vectors = _row_signature_matrix(g)
    model = _kmeans(vectors, count, seed)
    representatives: list[int] = []
    for j in range(model.k):
        if not (model.assignment == j).any():
            continue
        distances = ((vectors - model.centroids[j]) ** 2).sum(axis=1)
        nearest = int(np.argmin(distances))  # first minimum: lowest row index on ties
        if nearest not in representatives:
            representatives.append(nearest)
    return representatives


def select_fewshot_examples(g: Table, r: int, count: int) -> list[int]:
    """Rows of G most similar to row r, excluding r; ties favor smaller indices."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 0 <= r < g.row_count:
        raise ValueError(f"row {r} outside table of {g.row_count} rows")
    vectors = _row_signature_matrix(g)
    similarities = vectors @ vectors[r]
    order = np.argsort(-similarities, kind="stable")
    return [int(i) for i in order if i != r][:count]


def _snippet_input_columns(t: Table, spec: TaskSpec) -> list[str]:
    return [c for c in t.columns if c != ANNOTATION_LABEL_COLUMN]


def _masked_rows(t: Table, spec: TaskSpec, mask_target: bool) -> list[dict[str, str | None]]:
    """Rows as transform() sees them: label column dropped, target masked if asked."""
    columns = _snippet_input_columns(t, spec)
    rows = []
    for i in range(t.row_count):
        row = {c: t.cell(i, c) for c in columns}
        if mask_target:
            row[spec.target] = None
        rows.append(row)
    return rows


def _expected_values(t: Table, spec: TaskSpec) -> list[str | None]:
    column = ANNOTATION_LABEL_COLUMN if spec.task_kind == "detect" else spec.target
    return list(t.column_values(column))


def validate_snippet(snippet: Snippet, holdout: Table, spec: TaskSpec, executor) -> float | None:
    """Holdout accuracy of a snippet; Unknown and failed rows count as incorrect.

    Returns None (snippet discarded) when the execution session itself fails.
    """
    mask_target = spec.task_kind in ("impute", "correct")
    rows = _masked_rows(holdout, spec, mask_target)
    expected = _expected_values(holdout, spec)
    try:
        results = executor.run(snippet.source, rows)
    except ExecutorError as exc:
        log.warning("snippet fold=%s iter=%s discarded: %s", snippet.fold_id, snippet.iteration, exc)
        return None
    hits = 0
    for result, truth in zip(results, expected):
        if not result.ok or result.value == UNKNOWN:
            continue
        if normalize_value(result.value) == normalize_value(truth):
            hits += 1
    return hits / len(expected) if expected else 0.0


def consensus(outputs: list[tuple[Snippet, dict[int, str | None]]]) -> ConsensusResult:
    """Per-row plurality vote over non-Unknown outputs.

    Vote ties resolve to the value emitted by the snippet with the highest
    validation accuracy, then the lowest fold id. Rows where every snippet
    returned Unknown or failed are abstentions.
    """
    if not outputs:
        raise ValueError("consensus requires at least one snippet's outputs")
    tie_order = sorted(
        outputs,
        key=lambda pair: (-(pair[0].validation_accuracy or 0.0), pair[0].fold_id),
    )
    all_rows = sorted({row for _, values in outputs for row in values})
    per_row: dict[int, tuple[str, int, list[int]]] = {}
    abstained: set[int] = set()
    for row in all_rows:
        votes = Counter()
        for _, values in outputs:
            value = values.get(row)
            if value is not None and value != UNKNOWN:
                votes[value] += 1
        if not votes:
            abstained.add(row)
            continue
        top = max(votes.values())
        tied = [value for value, count in votes.items() if count == top]
        if len(tied) == 1:
            winner = tied[0]
        else:
            winner = tied[0]
            for snippet, values in tie_order:
                candidate = values.get(row)
                if candidate in tied:
                    winner = candidate
                    break
        contributors = [
            snippet.fold_id for snippet, values in outputs if values.get(row) == winner
        ]
        per_row[row] = (winner, top, contributors)
    return ConsensusResult(per_row=per_row, abstained=abstained)


def _example_rows_for(
    method: str, g_train: Table, spec: TaskSpec, fold_id: int, iteration: int
) -> str:
    if method == "row_alone":
        indices = select_diverse_samples(
            g_train, min(spec.n_example_rows, g_train.row_count),
            derive_seed(spec.seed, "diverse", fold_id),
        )
    elif method == "few_shot":
        rng = random.Random(derive_seed(spec.seed, "fewshot", fold_id, iteration))
        anchor = rng.randrange(g_train.row_count)
        neighbors = select_fewshot_examples(
            g_train, anchor, min(spec.fewshot_count, max(1, g_train.row_count - 1))
        )
        indices = [anchor] + neighbors
    else:  # memory_dependent
        rng = random.Random(derive_seed(spec.seed, "md", fold_id, iteration))
        population = range(g_train.row_count)
        indices = sorted(rng.sample(population, min(spec.n_example_rows, g_train.row_count)))
    return format_rows(g_train, indices, include_header=True)


def run_fold(
    fold_id: int,
    g_train: Table,
    g_holdout: Table,
    route: RouteDecision,
    spec: TaskSpec,
    gateway: ModelGateway,
    executor,
    reference_sample: str | None = None,
) -> Snippet | None:
    """Iterative generation for one fold; returns its best validated snippet.

    Memory-independent folds run the row-alone leg to exhaustion before
    switching to few-shot; generation stops early once a snippet clears the
    accuracy gate on the holdout.
    """
    if route.mode == "memory_dependent":
        legs = [("memory_dependent", spec.max_iterations)]
    else:
        legs = [("row_alone", spec.max_iterations), ("few_shot", spec.max_iterations)]
    best: Snippet | None = None
    iteration = 0
    for method, leg_iterations in legs:
        for _ in range(leg_iterations):
            iteration += 1
            example_rows = _example_rows_for(method, g_train, spec, fold_id, iteration)
            bundle = build_prompt(
                spec,
                example_rows,
                best_code=best if iteration > 1 else None,
                reference_sample=reference_sample if method == "memory_dependent" else None,
                iteration=iteration,
            )
            request = CompletionRequest(
                prompt=bundle.render(),
                temperature=CODEGEN_TEMPERATURE,
                tag=f"fold{fold_id}:iter{iteration}:{method}",
            )
            try:
                response = gateway.complete(request)
            except BackendError as exc:
                log.warning("completion failed (%s); iteration skipped", exc)
                continue
            source = parse_code(response)
            if source is None:
                continue
            scan = safety_scan(source)
            if not scan.ok:
                log.warning("snippet rejected by safety scan: %s", scan.reason)
                continue
            snippet = Snippet(
                source=source, fold_id=fold_id, iteration=iteration, method=method
            )
            accuracy = validate_snippet(snippet, g_holdout, spec, executor)
            if accuracy is None:
                continue
            snippet = snippet.with_accuracy(accuracy)
            if best is None or accuracy > (best.validation_accuracy or -1.0):
                best = snippet
            if accuracy >= spec.accuracy_gate:
                return best
    return best


def _query_indices(d: Table, spec: TaskSpec) -> list[int]:
    if spec.task_kind == "impute":
        j = d.column_index(spec.target)
        return [i for i, row in enumerate(d.rows) if row[j] is None]
    return list(range(d.row_count))


def _reference_sample_text(match: KbMatch, kb: list[KbEntry], seed: int) -> str | None:
    entry = next((e for e in kb if e.id == match.entry_id), None)
    if entry is None:
        return None
    rng = random.Random(derive_seed(seed, "reference"))
    count = min(REFERENCE_SAMPLE_ROWS, entry.table.row_count)
    indices = sorted(rng.sample(range(entry.table.row_count), count))
    return format_rows(entry.table, indices, include_header=True)


def _run_snippet_over(
    snippet: Snippet,
    rows: list[dict[str, str | None]],
    row_ids: list[int],
    executor,
) -> dict[int, str | None] | None:
    """Map table row ids to outputs; None per row marks a failed execution."""
    try:
        results = executor.run(snippet.source, rows)
    except ExecutorError as exc:
        log.warning("snippet fold=%s discarded during execution: %s", snippet.fold_id, exc)
        return None
    outputs: dict[int, str | None] = {}
    for row_id, result in zip(row_ids, results):
        outputs[row_id] = result.value if result.ok else None
    return outputs


def _consensus_g_accuracy(
    g_consensus: ConsensusResult, g: Table, spec: TaskSpec
) -> float:
    expected = _expected_values(g, spec)
    hits = 0
    for i, truth in enumerate(expected):
        entry = g_consensus.per_row.get(i)
        if entry is not None and normalize_value(entry[0]) == normalize_value(truth):
            hits += 1
    return hits / len(expected) if expected else 0.0


def run_task(
    d: Table,
    spec: TaskSpec,
    kb: list[KbEntry],
    gateway: ModelGateway,
    executor,
    annotations: Table | None = None,
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> tuple[Table, WrangleReport]:
    """Full codegen pipeline over one dataset/task; returns output table and report.

    Raises WrangleTaskError (report attached) when no fold produced an
    applicable snippet, so callers never get a silent partial output.
    """
    d.column_index(spec.target)  # fail fast on a missing target
    if spec.task_kind == "detect" and ANNOTATION_LABEL_COLUMN in d.columns:
        raise TableError(
            f"detect would add a {ANNOTATION_LABEL_COLUMN!r} column but one already exists"
        )
    calls_before = gateway.ledger.total_calls
    warnings: list[str] = []

    relevance = select_relevant_columns(d, spec.target)
    selected = set(relevance.selected)
    d_tilde = d.select_columns(
        [c for c in d.columns if c in selected] + [spec.target]
    )
    route = route_workflow(d_tilde, spec, kb, threshold)
    g = ground_truth(d_tilde, spec, annotations)
    folds = make_folds(g, spec.k_folds, spec.seed)
    reference_sample = (
        _reference_sample_text(route.match, kb, spec.seed) if route.match else None
    )

    snippets: list[Snippet] = []
    for fold_id in range(spec.k_folds):
        g_train = g.subset_rows(folds.complement_indices(fold_id))
        g_holdout = g.subset_rows(folds.fold_indices(fold_id))
        best = run_fold(
            fold_id, g_train, g_holdout, route, spec, gateway, executor, reference_sample
        )
        if best is not None:
            snippets.append(best)

    def _report(
        method_used: str,
        records: list[SnippetRecord],
        accuracy: float | None,
        abstention_rate: float,
    ) -> WrangleReport:
        return WrangleReport(
            task_kind=spec.task_kind,
            dataset=d.name,
            target=spec.target,
            mode="codegen",
            method_used=method_used,
            selected_columns=list(relevance.selected),
            kb_match=(
                {"id": route.match.entry_id, "score": round(route.match.score, 9)}
                if route.match
                else None
            ),
            snippets=records,
            accuracy=accuracy,
            llm_calls=gateway.ledger.total_calls - calls_before,
            abstention_rate=abstention_rate,
            seed=spec.seed,
            k_folds=spec.k_folds,
            max_iterations=spec.max_iterations,
            warnings=warnings,
        )

    if not snippets:
        raise WrangleTaskError(
            "no fold produced a usable snippet",
            report=_report("none", [], None, 0.0),
        )

    # Gate check and self-assessment: every snippet runs over masked G rows.
    mask_g = spec.task_kind in ("impute", "correct")
    g_masked = _masked_rows(g, spec, mask_g)
    g_expected = _expected_values(g, spec)
    g_ids = list(range(g.row_count))
    records: list[SnippetRecord] = []
    applied: list[Snippet] = []
    g_outputs: dict[int, dict[int, str | None]] = {}
    for snippet in snippets:
        outputs = _run_snippet_over(snippet, g_masked, g_ids, executor)
        if outputs is None:
            records.append(
                SnippetRecord(
                    snippet.fold_id, snippet.iteration, snippet.method,
                    snippet.validation_accuracy or 0.0, applied=False,
                )
            )
            warnings.append(f"fold {snippet.fold_id}: snippet execution failed over G")
            continue
        hits = sum(
            1
            for i, truth in enumerate(g_expected)
            if outputs.get(i) not in (None, UNKNOWN)
            and normalize_value(outputs[i]) == normalize_value(truth)
        )
        g_accuracy = hits / len(g_expected) if g_expected else 0.0
        passes_gate = snippet.method != "row_alone" or g_accuracy >= spec.accuracy_gate
        records.append(
            SnippetRecord(
                snippet.fold_id, snippet.iteration, snippet.method,
                snippet.validation_accuracy or 0.0,
                applied=passes_gate, g_accuracy=round(g_accuracy, 9),
            )
        )
        if passes_gate:
            applied.append(snippet)
            g_outputs[snippet.fold_id] = outputs
        else:
            warnings.append(
                f"fold {snippet.fold_id}: row-alone snippet below accuracy gate on G "
                f"({g_accuracy:.4f} < {spec.accuracy_gate})"
            )

    method_used = _method_used(route, applied or snippets)
    if not applied:
        raise WrangleTaskError(
            "every snippet fell below the accuracy gate",
            report=_report(method_used, records, None, 0.0),
        )

    g_consensus = consensus([(s, g_outputs[s.fold_id]) for s in applied])
    self_accuracy = _consensus_g_accuracy(g_consensus, g, spec)

    # Application pass over the query rows of the filtered dataset.
    query = _query_indices(d_tilde, spec)
    mask_query = spec.task_kind == "correct"
    query_view = d_tilde.subset_rows(query)
    query_rows = _masked_rows(query_view, spec, mask_query)
    outputs_per_snippet: list[tuple[Snippet, dict[int, str | None]]] = []
    for snippet in applied:
        outputs = _run_snippet_over(snippet, query_rows, query, executor)
        if outputs is None:
            warnings.append(f"fold {snippet.fold_id}: snippet execution failed over queries")
            continue
        outputs_per_snippet.append((snippet, outputs))
    if not outputs_per_snippet:
        raise WrangleTaskError(
            "no snippet survived the application pass",
            report=_report(method_used, records, round(self_accuracy, 9), 0.0),
        )
    result = consensus(outputs_per_snippet)

    output = _apply_consensus(d, spec, query, result)
    abstention_rate = len(result.abstained) / len(query) if query else 0.0
    report = _report(
        method_used, records, round(self_accuracy, 9), round(abstention_rate, 9)
    )
    return output, report


def _method_used(route: RouteDecision, snippets: list[Snippet]) -> str:
    if route.mode == "memory_dependent":
        return "memory_dependent"
    methods = Counter(s.method for s in snippets)
    if not methods:
        return "none"
    top = max(methods.values())
    tied = [m for m, c in methods.items() if c == top]
    return "row_alone" if "row_alone" in tied else tied[0]


def _apply_consensus(
    d: Table, spec: TaskSpec, query: list[int], result: ConsensusResult
) -> Table:
    if spec.task_kind == "detect":
        labels: list[str | None] = [None] * d.row_count
        for row in query:
            entry = result.per_row.get(row)
            labels[row] = entry[0] if entry else None
        return d.with_column(ANNOTATION_LABEL_COLUMN, labels)

    target_values = list(d.column_values(spec.target))
    for row in query:
        entry = result.per_row.get(row)
        if entry is None:
            continue  # abstained rows stay untouched
        value = entry[0]
        if spec.task_kind == "impute":
            target_values[row] = value
        else:  # correct: replace only on normalized mismatch
            if normalize_value(target_values[row]) != normalize_value(value):
                target_values[row] = value
    return d.with_column(spec.target, target_values)


def run_rowwise_baseline(
    d: Table,
    spec: TaskSpec,
    gateway: ModelGateway,
    annotations: Table | None = None,
) -> tuple[Table, WrangleReport]:
    """The costly alternative: one model call per query row, no code generation."""
    d.column_index(spec.target)
    calls_before = gateway.ledger.total_calls
    g = ground_truth(d, spec, annotations)
    rng = random.Random(derive_seed(spec.seed, "baseline"))
    count = min(spec.n_example_rows, g.row_count)
    fewshot = format_rows(
        g, sorted(rng.sample(range(g.row_count), count)), include_header=True
    )

    query = _query_indices(d, spec)
    answers: dict[int, str] = {}
    for row in query:
        bundle = build_rowwise_prompt(spec, d.row_dict(row), fewshot)
        request = CompletionRequest(
            prompt=bundle.render(),
            temperature=BASELINE_TEMPERATURE,
            tag=f"row{row}",
        )
        try:
            response = gateway.complete(request)
        except BackendError:
            continue
        value = _parse_rowwise_answer(response, spec)
        if value is not None:
            answers[row] = value

    if spec.task_kind == "detect":
        labels: list[str | None] = [None] * d.row_count
        for row, value in answers.items():
            labels[row] = value
        output = d.with_column(ANNOTATION_LABEL_COLUMN, labels)
    else:
        target_values = list(d.column_values(spec.target))
        for row, value in answers.items():
            if spec.task_kind == "impute" or normalize_value(
                target_values[row]
            ) != normalize_value(value):
                target_values[row] = value
        output = d.with_column(spec.target, target_values)

    abstention_rate = (len(query) - len(answers)) / len(query) if query else 0.0
    report = WrangleReport(
        task_kind=spec.task_kind,
        dataset=d.name,
        target=spec.target,
        mode="row_wise_baseline",
        method_used="row_wise_baseline",
        selected_columns=[c for c in d.columns if c != spec.target],
        kb_match=None,
        snippets=[],
        accuracy=None,
        llm_calls=gateway.ledger.total_calls - calls_before,
        abstention_rate=round(abstention_rate, 9),
        seed=spec.seed,
        k_folds=spec.k_folds,
        max_iterations=spec.max_iterations,
    )
    return output, report


def _parse_rowwise_answer(response: str, spec: TaskSpec) -> str | None:
    lines = [line.strip() for line in response.strip().splitlines() if line.strip()]
    if not lines:
        return None
    value = lines[0]
    if value == UNKNOWN:
        return None
    if spec.task_kind == "detect":
        folded = normalize_value(value)
        if folded == "yes":
            return "Yes"
        if folded == "no":
            return "No"
        return None
    return value
