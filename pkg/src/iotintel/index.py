"""Exact-cosine vector store with metadata filtering.

The store is deliberately exact (no approximate nearest neighbor): corpora at
this scale are small enough for a full scan, and exactness lets searches be
checked against a brute-force oracle. Filtering happens before ranking, so
``k`` counts matches after the metadata filter.

Embeddings come from any object satisfying ``Embedder``. The built-in
``HashedTrigramEmbedder`` is deterministic and dependency-free: it hashes
character 3-grams of the lowercased, "#"-padded text into 384 buckets and
L2-normalizes the counts.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence, Union, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from iotintel.chunking import Chunk

FORMAT_VERSION = 1
DEFAULT_DIMENSION = 384


class IndexError_(Exception):
    """Vector store failure (dimension mismatch, bad persistence file, ...)."""


class EmbeddingError(ValueError):
    """Text cannot be embedded (empty input or provider failure)."""


@runtime_checkable
class Embedder(Protocol):
    """Maps text to a unit-norm vector. Implementations must be deterministic."""

    name: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedTrigramEmbedder:
    """Deterministic fallback embedder: hashed character 3-grams.

    Recipe: lowercase the text, pad with one "#" at each end, take every
    character 3-gram, hash each gram with md5 into ``dimension`` buckets,
    count, and L2-normalize.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.name = f"hashed-trigram-{dimension}"

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        padded = "#" + text.lower() + "#"
        counts = np.zeros(self.dimension, dtype=np.float64)
        for i in range(len(padded) - 2):
            gram = padded[i:i + 3]
            digest = hashlib.md5(gram.encode("utf-8")).hexdigest()
            counts[int(digest, 16) % self.dimension] += 1.0
        norm = float(np.linalg.norm(counts))
        return counts / norm


# --- metadata filter expressions -------------------------------------------

@dataclass(frozen=True)
class MatchAll:
    """Matches every chunk."""


def _require_field(name: str) -> None:
    if not name:
        raise ValueError("filter field name must be non-empty")


@dataclass(frozen=True)
class Eq:
    field: str
    value: object

    def __post_init__(self) -> None:
        _require_field(self.field)


@dataclass(frozen=True)
class Neq:
    field: str
    value: object

    def __post_init__(self) -> None:
        _require_field(self.field)


@dataclass(frozen=True)
class Contain:
    field: str
    text: str

    def __post_init__(self) -> None:
        _require_field(self.field)


@dataclass(frozen=True)
class In:
    field: str
    values: tuple

    def __post_init__(self) -> None:
        _require_field(self.field)
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class _NumericComp:
    field: str
    value: float

    def __post_init__(self) -> None:
        _require_field(self.field)


class Gt(_NumericComp):
    pass


class Gte(_NumericComp):
    pass


class Lt(_NumericComp):
    pass


class Lte(_NumericComp):
    pass


def _require_arity(exprs: tuple) -> None:
    if len(exprs) < 1:
        raise ValueError("And/Or require at least one operand")


@dataclass(frozen=True)
class And:
    exprs: tuple

    def __init__(self, *exprs: "FilterExpr"):
        if len(exprs) == 1 and isinstance(exprs[0], (list, tuple)):
            exprs = tuple(exprs[0])
        _require_arity(exprs)
        object.__setattr__(self, "exprs", exprs)


@dataclass(frozen=True)
class Or:
    exprs: tuple

    def __init__(self, *exprs: "FilterExpr"):
        if len(exprs) == 1 and isinstance(exprs[0], (list, tuple)):
            exprs = tuple(exprs[0])
        _require_arity(exprs)
        object.__setattr__(self, "exprs", exprs)


@dataclass(frozen=True)
class Not:
    expr: "FilterExpr"


FilterExpr = Union[MatchAll, Eq, Neq, Contain, In, Gt, Gte, Lt, Lte, And, Or, Not]


@dataclass
class FilterDiagnostics:
    """Counts soft failures observed while evaluating filters."""

    type_mismatches: int = 0


def _is_number(value: object) -> bool:
    # bool is an int subclass but is not a number for comparison purposes
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _eq_leaf(value: object, target: object) -> bool:
    if isinstance(value, list):
        return any(item == target for item in value)
    return value == target


def eval_filter(expr: FilterExpr, metadata: dict,
                diagnostics: FilterDiagnostics | None = None) -> bool:
    """Evaluate a filter expression against one chunk's metadata.

    Missing fields fail every leaf test except Neq (vacuously true) and
    MatchAll. Numeric comparators on non-numeric values are false, not errors,
    and are tallied in ``diagnostics`` when provided.
    """
    if isinstance(expr, MatchAll):
        return True
    if isinstance(expr, And):
        return all(eval_filter(e, metadata, diagnostics) for e in expr.exprs)
    if isinstance(expr, Or):
        return any(eval_filter(e, metadata, diagnostics) for e in expr.exprs)
    if isinstance(expr, Not):
        return not eval_filter(expr.expr, metadata, diagnostics)

    present = expr.field in metadata
    value = metadata.get(expr.field)

    if isinstance(expr, Neq):
        if not present:
            return True
        return not _eq_leaf(value, expr.value)
    if not present:
        return False
    if isinstance(expr, Eq):
        return _eq_leaf(value, expr.value)
    if isinstance(expr, In):
        return any(_eq_leaf(value, target) for target in expr.values)
    if isinstance(expr, Contain):
        needle = expr.text.lower()
        if isinstance(value, str):
            return needle in value.lower()
        if isinstance(value, list):
            return any(isinstance(item, str) and needle in item.lower() for item in value)
        return False
    if isinstance(expr, (Gt, Gte, Lt, Lte)):
        if not _is_number(value):
            if diagnostics is not None:
                diagnostics.type_mismatches += 1
            return False
        if isinstance(expr, Gt):
            return value > expr.value
        if isinstance(expr, Gte):
            return value >= expr.value
        if isinstance(expr, Lt):
            return value < expr.value
        return value <= expr.value
    raise TypeError(f"unknown filter expression: {type(expr).__name__}")


# --- search types -----------------------------------------------------------

@dataclass(frozen=True)
class SearchParams:
    k: int = 4
    filter: FilterExpr = field(default_factory=MatchAll)
    min_score: float = -1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if not -1.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must be in [-1, 1]")


@dataclass(frozen=True)
class IndexedChunk:
    chunk: "Chunk"
    vector: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexedChunk):
            return NotImplemented
        return self.chunk == other.chunk and np.array_equal(self.vector, other.vector)

    def __hash__(self) -> int:
        return hash(self.chunk.chunk_id)


@dataclass(frozen=True)
class Hit:
    """One search result. ``score`` is None for pure metadata lookups."""

    chunk: "Chunk"
    score: float | None


class VectorIndex:
    """In-process exact-cosine store, keyed by chunk_id.

    Writers replace the internal mapping wholesale (copy-on-write) under a
    lock, so concurrent readers always see a complete batch: either all of an
    upsert's chunks or none of them.
    """

    def __init__(self, embedder: Embedder | None = None):
        self.embedder: Embedder = embedder or HashedTrigramEmbedder()
        self._chunks: dict[str, IndexedChunk] = {}
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def dimension(self) -> int:
        return self.embedder.dimension

    # -- writes --

    def upsert(self, items: Iterable[IndexedChunk]) -> int:
        """Insert or replace chunks by chunk_id. Returns the number applied."""
        staged = list(items)
        for item in staged:
            if item.vector.shape != (self.dimension,):
                raise IndexError_(
                    f"vector dimension {item.vector.shape} does not match "
                    f"index dimension {self.dimension}")
        with self._write_lock:
            updated = dict(self._chunks)
            for item in staged:
                updated[item.chunk.chunk_id] = item
            self._chunks = updated
        return len(staged)

    def add_chunks(self, chunks: Iterable["Chunk"]) -> int:
        """Embed chunk texts with the index's embedder, then upsert."""
        items = [IndexedChunk(chunk=c, vector=self.embedder.embed(c.text))
                 for c in chunks]
        return self.upsert(items)

    def delete_by_dataset(self, dataset_id: str) -> int:
        with self._write_lock:
            kept = {cid: item for cid, item in self._chunks.items()
                    if item.chunk.dataset_id != dataset_id}
            removed = len(self._chunks) - len(kept)
            self._chunks = kept
        return removed

    # -- reads --

    def search(self, query_text: str, params: SearchParams | None = None,
               diagnostics: FilterDiagnostics | None = None) -> list[Hit]:
        """Rank filter-passing chunks by cosine similarity to the query."""
        params = params or SearchParams()
        snapshot = self._chunks
        if not snapshot:
            return []
        query_vec = self.embedder.embed(query_text)
        hits = []
        for item in snapshot.values():
            if not eval_filter(params.filter, item.chunk.metadata, diagnostics):
                continue
            score = float(np.dot(item.vector, query_vec))
            if score >= params.min_score:
                hits.append(Hit(chunk=item.chunk, score=score))
        hits.sort(key=lambda h: (-h.score, h.chunk.doc_id, h.chunk.seq_no))
        return hits[:params.k]

    def filter_search(self, filter_expr: FilterExpr, limit: int | None = None,
                      diagnostics: FilterDiagnostics | None = None) -> list[Hit]:
        """Return filter matches without ranking, ordered by doc_id then seq_no."""
        snapshot = self._chunks
        hits = [Hit(chunk=item.chunk, score=None)
                for item in snapshot.values()
                if eval_filter(filter_expr, item.chunk.metadata, diagnostics)]
        hits.sort(key=lambda h: (h.chunk.doc_id, h.chunk.seq_no))
        return hits if limit is None else hits[:limit]

    # -- persistence --

    def save(self, path: str | Path) -> None:
        snapshot = self._chunks
        header = {"format_version": FORMAT_VERSION, "embedder": self.embedder.name,
                  "dimension": self.dimension}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for cid in sorted(snapshot):
                item = snapshot[cid]
                record = {"chunk": item.chunk.to_dict(),
                          "vector": [float(x) for x in item.vector]}
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path, embedder: Embedder | None = None) -> "VectorIndex":
        from iotintel.chunking import Chunk

        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line)
                version = header["format_version"]
                embedder_name = header["embedder"]
                dimension = header["dimension"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise IndexError_(f"corrupted index header: {exc}") from exc
            if version != FORMAT_VERSION:
                raise IndexError_(
                    f"index format version {version} does not match "
                    f"supported version {FORMAT_VERSION}")
            if embedder is None:
                if embedder_name != HashedTrigramEmbedder(dimension).name:
                    raise IndexError_(
                        f"index was built with embedder {embedder_name!r}; "
                        "pass a matching embedder to load()")
                embedder = HashedTrigramEmbedder(dimension)
            if embedder.name != embedder_name or embedder.dimension != dimension:
                raise IndexError_(
                    f"embedder {embedder.name!r} (dim {embedder.dimension}) does not "
                    f"match index embedder {embedder_name!r} (dim {dimension})")
            index = cls(embedder)
            items = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                chunk = Chunk.from_dict(record["chunk"])
                vector = np.array(record["vector"], dtype=np.float64)
                items.append(IndexedChunk(chunk=chunk, vector=vector))
            index.upsert(items)
            return index
