"""Knowledge base of reference tables, retrieved by column-signature similarity.

Signatures come from a deterministic hashing trigram embedder so retrieval is
reproducible offline; a remote embedding backend can be plugged in behind the
same (name, samples) -> SignatureVector interface.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import TableError
from .tabular import Table, load_table

SIGNATURE_DIMS = 512
SAMPLE_VALUES_PER_COLUMN = 20
DEFAULT_SIMILARITY_THRESHOLD = 0.75
MANIFEST_FILENAME = "manifest.json"
SIGNATURE_CACHE_FILENAME = ".signatures.json"


@dataclass(frozen=True)
class SignatureVector:
    dims: int
    values: np.ndarray  # unit L2 norm, or all-zero for empty input

    def cosine(self, other: "SignatureVector") -> float:
        return float(np.dot(self.values, other.values))


@dataclass(frozen=True)
class KbEntry:
    id: str
    table: Table
    column_signatures: dict[str, SignatureVector]
    ingested_at: float
    description: str = ""


@dataclass(frozen=True)
class KbMatch:
    entry_id: str
    score: float
    column_alignment: dict[str, str]  # query column -> best-matching KB column


@dataclass
class IngestResult:
    entries: list[KbEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


ColumnEmbedder = Callable[[str, Iterable[str]], SignatureVector]


def _trigrams(text: str) -> Iterable[str]:
    if len(text) < 3:
        if text:
            yield text
        return
    for i in range(len(text) - 2):
        yield text[i : i + 3]


def _hash_into(counts: Counter, dims: int) -> np.ndarray:
    vec = np.zeros(dims, dtype=np.float64)
    for token, count in counts.items():
        digest = int.from_bytes(blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
        bucket = digest % dims
        sign = 1.0 if (digest >> 63) & 1 == 0 else -1.0
        vec[bucket] += sign * count
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def embed_text(text: str, dims: int = SIGNATURE_DIMS) -> SignatureVector:
    """Hash the character trigrams of one string into a unit vector."""
    return SignatureVector(dims, _hash_into(Counter(_trigrams(text)), dims))


def embed_column(
    name: str, sample_values: Iterable[str], dims: int = SIGNATURE_DIMS
) -> SignatureVector:
    """Signature of a column: trigrams of the lowercased name plus sample values.

    Samples are deduplicated and sorted before capping at
    ``SAMPLE_VALUES_PER_COLUMN`` so the result is row-order invariant.
    """
    samples = sorted({v for v in sample_values if v is not None})[:SAMPLE_VALUES_PER_COLUMN]
    counts: Counter = Counter(_trigrams(name.lower()))
    for value in samples:
        counts.update(_trigrams(value))
    return SignatureVector(dims, _hash_into(counts, dims))


def table_signatures(
    t: Table, embedder: ColumnEmbedder = embed_column
) -> dict[str, SignatureVector]:
    return {
        column: embedder(column, (v for v in t.column_values(column) if v is not None))
        for column in t.columns
    }


def ingest_kb(directory: str | Path, embedder: ColumnEmbedder = embed_column) -> IngestResult:
    """Load every CSV under a directory into KB entries with column signatures.

    Unreadable files are skipped and reported as warnings, not errors.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise TableError(f"KB directory {directory} does not exist")
    descriptions = {}
    manifest = directory / MANIFEST_FILENAME
    if manifest.is_file():
        try:
            descriptions = {str(k): str(v) for k, v in json.loads(manifest.read_text()).items()}
        except (OSError, json.JSONDecodeError, AttributeError):
            pass
    result = IngestResult()
    for path in sorted(directory.glob("*.csv")):
        try:
            table = load_table(path)
        except TableError as exc:
            result.warnings.append(f"{path.name}: {exc}")
            continue
        result.entries.append(
            KbEntry(
                id=path.stem,
                table=table,
                column_signatures=table_signatures(table, embedder),
                ingested_at=time.time(),
                description=descriptions.get(path.stem, ""),
            )
        )
    return result


def score_entry(
    query_signatures: dict[str, SignatureVector], entry: KbEntry
) -> tuple[float, dict[str, str]]:
    """Mean over query columns of the best cosine against the entry's columns."""
    alignment: dict[str, str] = {}
    best_scores = []
    entry_columns = list(entry.column_signatures.items())
    for column, signature in query_signatures.items():
        best_column, best_score = "", -1.0
        for kb_column, kb_signature in entry_columns:
            score = signature.cosine(kb_signature)
            if score > best_score:
                best_column, best_score = kb_column, score
        alignment[column] = best_column
        best_scores.append(best_score)
    return float(np.mean(best_scores)) if best_scores else 0.0, alignment


def retrieve_reference(
    d_tilde: Table,
    kb: list[KbEntry],
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
    embedder: ColumnEmbedder = embed_column,
) -> KbMatch | None:
    """Best-scoring KB entry, returned only when its score strictly exceeds the threshold.

    Ties are broken toward the lexicographically smaller entry id.
    """
    if not 0.0 <= threshold <= 1.0:
        raise TableError(f"similarity threshold {threshold} outside [0, 1]")
    if not kb:
        return None
    query_signatures = table_signatures(d_tilde, embedder)
    best: KbMatch | None = None
    for entry in sorted(kb, key=lambda e: e.id):
        score, alignment = score_entry(query_signatures, entry)
        if best is None or score > best.score:
            best = KbMatch(entry_id=entry.id, score=score, column_alignment=alignment)
    if best is not None and best.score > threshold:
        return best
    return None


def write_signature_cache(entries: list[KbEntry], directory: str | Path) -> Path:
    path = Path(directory) / SIGNATURE_CACHE_FILENAME
    payload = {
        "version": 1,
        "entries": [
            {
                "id": entry.id,
                "columns": list(entry.table.columns),
                "row_count": entry.table.row_count,
                "description": entry.description,
                "signatures": {
                    column: [round(x, 9) for x in sig.values.tolist()]
                    for column, sig in entry.column_signatures.items()
                },
            }
            for entry in entries
        ],
    }
    path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return path


def read_signature_cache(directory: str | Path) -> list[dict]:
    path = Path(directory) / SIGNATURE_CACHE_FILENAME
    if not path.is_file():
        return []
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return []
    return list(payload.get("entries", []))
