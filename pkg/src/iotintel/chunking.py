"""Text splitters, retrieval-quality metrics, and chunking-strategy optimization.

Three splitter families are supported. Character and TokenText are sliding
windows (stride = size - overlap) over characters and whitespace tokens
respectively. RecursiveCharacter splits on a separator hierarchy
("\\n\\n", "\\n", " ", ""), greedily merges adjacent segments up to ``size``
characters, then prepends the tail ``overlap`` characters of the previous
merged segment to each subsequent chunk.

Strategy quality is measured per question as context precision (are the
top-ranked chunks relevant) and context recall (how many ground-truth
statements the chunks support), judged by a pluggable oracle. The optimizer
sweeps a (splitter, size, overlap) grid and picks the harmonic-mean maximum.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

from iotintel.index import Embedder, SearchParams, VectorIndex
from iotintel.llmgateway import ChatProvider, ask, extract_json_object

if TYPE_CHECKING:
    from iotintel.corpus.types import Document

logger = logging.getLogger(__name__)

SPLITTERS = ("Character", "RecursiveCharacter", "TokenText")
RECURSIVE_SEPARATORS = ("\n\n", "\n", " ", "")


class EvaluationError(Exception):
    """Strategy evaluation failed (bad testset, judge failure, empty grid)."""


@dataclass(frozen=True)
class ChunkingStrategy:
    """How to split documents: splitter family, window size, window overlap.

    Units are characters for Character/RecursiveCharacter and whitespace
    tokens for TokenText. ``overlap`` must be strictly smaller than ``size``.
    """

    splitter: str
    size: int
    overlap: int

    def __post_init__(self) -> None:
        if self.splitter not in SPLITTERS:
            raise ValueError(f"unknown splitter: {self.splitter!r}")
        if self.size < 1:
            raise ValueError("size must be positive")
        if self.overlap < 0:
            raise ValueError("overlap must be non-negative")
        if self.overlap >= self.size:
            raise ValueError(f"overlap {self.overlap} must be < size {self.size}")

    def to_dict(self) -> dict:
        return {"splitter": self.splitter, "size": self.size, "overlap": self.overlap}

    @classmethod
    def from_dict(cls, data: dict) -> "ChunkingStrategy":
        return cls(splitter=data["splitter"], size=int(data["size"]),
                   overlap=int(data["overlap"]))


@dataclass(frozen=True)
class Chunk:
    """One retrievable piece of a document.

    ``char_span`` locates the chunk's own (non-overlap) region in the parent
    page_content. ``metadata`` is inherited from the parent document.
    """

    chunk_id: str
    doc_id: str
    dataset_id: str
    seq_no: int
    text: str
    char_span: tuple[int, int]
    metadata: dict

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")
        if self.seq_no < 0:
            raise ValueError("seq_no must be >= 0")

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "dataset_id": self.dataset_id,
            "seq_no": self.seq_no,
            "text": self.text,
            "char_span": list(self.char_span),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Chunk":
        return cls(
            chunk_id=data["chunk_id"],
            doc_id=data["doc_id"],
            dataset_id=data["dataset_id"],
            seq_no=int(data["seq_no"]),
            text=data["text"],
            char_span=(int(data["char_span"][0]), int(data["char_span"][1])),
            metadata=dict(data["metadata"]),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chunk):
            return NotImplemented
        return (self.chunk_id == other.chunk_id and self.doc_id == other.doc_id
                and self.dataset_id == other.dataset_id and self.seq_no == other.seq_no
                and self.text == other.text and self.char_span == other.char_span
                and self.metadata == other.metadata)

    def __hash__(self) -> int:
        return hash(self.chunk_id)


# --- splitters --------------------------------------------------------------

def _window_spans(length: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Sliding-window spans over ``length`` units: full windows with stride
    size-overlap, then one final window reaching the end."""
    stride = size - overlap
    spans = []
    start = 0
    while start + size < length:
        spans.append((start, start + size))
        start += stride
    spans.append((start, length))
    return spans


def _split_character(text: str, size: int, overlap: int) -> list[tuple[str, tuple[int, int]]]:
    return [(text[lo:hi], (lo, hi)) for lo, hi in _window_spans(len(text), size, overlap)]


def _split_token(text: str, size: int, overlap: int) -> list[tuple[str, tuple[int, int]]]:
    tokens = list(re.finditer(r"\S+", text))
    if len(tokens) <= size:
        return [(text, (0, len(text)))]
    out = []
    for lo, hi in _window_spans(len(tokens), size, overlap):
        window = tokens[lo:hi]
        piece = " ".join(m.group(0) for m in window)
        out.append((piece, (window[0].start(), window[-1].end())))
    return out


def _recursive_base_spans(text: str, size: int) -> list[tuple[int, int]]:
    """Partition the text into contiguous spans of at most ``size`` characters.

    Splits on progressively finer separators, keeping each separator attached
    to the span before it, then greedily re-merges adjacent spans. Because the
    spans partition the text, concatenating them restores it exactly.
    """
    def split_span(lo: int, hi: int, sep_index: int) -> list[tuple[int, int]]:
        if hi - lo <= size:
            return [(lo, hi)]
        sep = RECURSIVE_SEPARATORS[sep_index]
        if sep == "":
            # hard cut into size-length pieces
            return [(p, min(p + size, hi)) for p in range(lo, hi, size)]
        pieces: list[tuple[int, int]] = []
        cursor = lo
        while cursor < hi:
            found = text.find(sep, cursor, hi)
            if found == -1:
                pieces.append((cursor, hi))
                break
            end = found + len(sep)
            pieces.append((cursor, end))
            cursor = end
        if len(pieces) == 1:
            return split_span(lo, hi, sep_index + 1)
        out: list[tuple[int, int]] = []
        for p_lo, p_hi in pieces:
            if p_hi - p_lo > size:
                out.extend(split_span(p_lo, p_hi, sep_index + 1))
            else:
                out.append((p_lo, p_hi))
        return out

    segments = split_span(0, len(text), 0)
    # greedy merge of adjacent segments back up to size
    merged: list[tuple[int, int]] = []
    cur_lo, cur_hi = segments[0]
    for seg_lo, seg_hi in segments[1:]:
        if seg_hi - cur_lo <= size:
            cur_hi = seg_hi
        else:
            merged.append((cur_lo, cur_hi))
            cur_lo, cur_hi = seg_lo, seg_hi
    merged.append((cur_lo, cur_hi))
    return merged


def _split_recursive(text: str, size: int, overlap: int) -> list[tuple[str, tuple[int, int]]]:
    if len(text) <= size:
        return [(text, (0, len(text)))]
    bases = _recursive_base_spans(text, size)
    out = []
    prev: tuple[int, int] | None = None
    for lo, hi in bases:
        if prev is None:
            out.append((text[lo:hi], (lo, hi)))
        else:
            reach = max(prev[0], lo - overlap)
            out.append((text[reach:hi], (lo, hi)))
        prev = (lo, hi)
    return out


def split(text: str, strategy: ChunkingStrategy, *, doc_id: str = "",
          dataset_id: str = "", metadata: dict | None = None) -> list[Chunk]:
    """Split text into chunks, carrying the given document identity along.

    Empty text yields no chunks. Text no longer than ``size`` (in the
    splitter's units) yields a single chunk equal to the input.
    """
    if not text:
        return []
    if strategy.splitter == "Character":
        pieces = _split_character(text, strategy.size, strategy.overlap)
    elif strategy.splitter == "TokenText":
        pieces = _split_token(text, strategy.size, strategy.overlap)
    else:
        pieces = _split_recursive(text, strategy.size, strategy.overlap)
    metadata = metadata or {}
    return [
        Chunk(chunk_id=f"{doc_id}#{seq}", doc_id=doc_id, dataset_id=dataset_id,
              seq_no=seq, text=piece, char_span=span, metadata=dict(metadata))
        for seq, (piece, span) in enumerate(pieces)
    ]


def split_document(doc: "Document", strategy: ChunkingStrategy) -> list[Chunk]:
    """Split one document's page_content, inheriting its metadata."""
    return split(doc.page_content, strategy, doc_id=doc.doc_id,
                 dataset_id=doc.dataset_id, metadata=doc.metadata)


def render_metadata(metadata: dict) -> str:
    """One "key: value" line per metadata entry, in insertion order."""
    return "\n".join(f"{key}: {value}" for key, value in metadata.items())


def metadata_chunk(doc: "Document") -> Chunk:
    """The single chunk for a metadata-only document.

    Its text is the rendered metadata, so the record stays human-readable
    when surfaced as evidence. Documents with no metadata cannot be chunked.
    """
    text = render_metadata(doc.metadata)
    if not text:
        raise ValueError(f"document {doc.doc_id} has neither content nor metadata")
    return Chunk(chunk_id=f"{doc.doc_id}#0", doc_id=doc.doc_id,
                 dataset_id=doc.dataset_id, seq_no=0, text=text,
                 char_span=(0, 0), metadata=dict(doc.metadata))


# --- testset generation -----------------------------------------------------

@dataclass(frozen=True)
class QAItem:
    question: str
    ground_truth: str
    source_doc_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.question or not self.ground_truth:
            raise ValueError("question and ground_truth must be non-empty")

    def to_dict(self) -> dict:
        return {"question": self.question, "ground_truth": self.ground_truth,
                "source_doc_ids": list(self.source_doc_ids)}

    @classmethod
    def from_dict(cls, data: dict) -> "QAItem":
        return cls(question=data["question"], ground_truth=data["ground_truth"],
                   source_doc_ids=tuple(data["source_doc_ids"]))


TESTSET_PROMPT = """\
Write one question-and-answer pair grounded in the document below. The \
question must be answerable from the document alone, and the answer must \
state the facts the document gives.

Document:
{content}

Respond with a JSON object: {{"question": "...", "ground_truth": "..."}}"""


def generate_testset(docs: Sequence["Document"], n: int, llm: ChatProvider, *,
                     rng: random.Random | None = None) -> list[QAItem]:
    """Generate ``n`` question/ground-truth pairs from sampled documents.

    Items whose LLM output cannot be parsed are retried once, then skipped;
    ending short of ``n`` is an error.
    """
    if not docs:
        raise ValueError("docs must be non-empty")
    if n == 0:
        return []
    order = list(range(len(docs)))
    if rng is not None:
        rng.shuffle(order)
    items: list[QAItem] = []
    skipped = 0
    for slot in range(n):
        doc = docs[order[slot % len(order)]]
        prompt = TESTSET_PROMPT.format(
            content=doc.page_content or render_metadata(doc.metadata))
        item = None
        for attempt in range(2):
            raw = ask(llm, prompt)
            try:
                parsed = extract_json_object(raw)
                item = QAItem(question=str(parsed["question"]),
                              ground_truth=str(parsed["ground_truth"]),
                              source_doc_ids=(doc.doc_id,))
                break
            except (ValueError, KeyError) as exc:
                logger.warning("testset item for %s unparseable (attempt %d): %s",
                               doc.doc_id, attempt + 1, exc)
        if item is None:
            skipped += 1
        else:
            items.append(item)
    if len(items) < n:
        raise EvaluationError(
            f"testset generation produced {len(items)} of {n} items "
            f"({skipped} skipped as unparseable)")
    return items


def save_testset(items: Iterable[QAItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), sort_keys=True) + "\n")


def load_testset(path: str | Path) -> list[QAItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(QAItem.from_dict(json.loads(line)))
    return items


# --- retrieval-quality metrics ---------------------------------------------

class RelevanceJudge(Protocol):
    """Binary oracle for chunk relevance and statement attribution."""

    def is_relevant(self, question: str, chunk_text: str) -> bool: ...

    def is_attributed(self, statement: str, chunk_texts: Sequence[str]) -> bool: ...


RELEVANCE_PROMPT = """\
Question: {question}

Passage:
{chunk}

Does the passage help answer the question? Reply with exactly "yes" or "no"."""

ATTRIBUTION_PROMPT = """\
Statement: {statement}

Passages:
{chunks}

Can the statement be attributed to the passages above? Reply with exactly \
"yes" or "no"."""


class LlmRelevanceJudge:
    """Judges relevance/attribution by asking a chat model yes/no questions."""

    def __init__(self, provider: ChatProvider, model_id: str | None = None):
        self._provider = provider
        self._model_id = model_id

    def _yes(self, prompt: str) -> bool:
        reply = ask(self._provider, prompt, model_id=self._model_id)
        return reply.strip().lower().startswith("yes")

    def is_relevant(self, question: str, chunk_text: str) -> bool:
        return self._yes(RELEVANCE_PROMPT.format(question=question, chunk=chunk_text))

    def is_attributed(self, statement: str, chunk_texts: Sequence[str]) -> bool:
        numbered = "\n".join(f"{i + 1}. {text}" for i, text in enumerate(chunk_texts))
        return self._yes(ATTRIBUTION_PROMPT.format(statement=statement, chunks=numbered))


def context_precision(question: str, hits: Sequence[Chunk],
                      judge: RelevanceJudge) -> float:
    """Rank-weighted precision of the retrieved chunks.

    With v_k the judge's binary relevance of the chunk at rank k (1-based)
    and precision@k the fraction of relevant chunks in the top k, returns
    sum_k(precision@k * v_k) / max(sum_k v_k, 1).
    """
    flags = [1 if judge.is_relevant(question, chunk.text) else 0 for chunk in hits]
    relevant_so_far = 0
    weighted = 0.0
    for k, flag in enumerate(flags, start=1):
        relevant_so_far += flag
        if flag:
            weighted += relevant_so_far / k
    return weighted / max(sum(flags), 1)


_STATEMENT_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_statements(text: str) -> list[str]:
    """Split text into sentence-statements on sentence-final punctuation."""
    parts = _STATEMENT_SPLIT.split(text.strip())
    return [p for p in parts if p]


def context_recall(ground_truth: str, hits: Sequence[Chunk],
                   judge: RelevanceJudge) -> float:
    """Fraction of ground-truth statements attributable to the chunks."""
    statements = split_statements(ground_truth)
    if not statements:
        raise EvaluationError("ground truth splits into zero statements")
    chunk_texts = [chunk.text for chunk in hits]
    attributed = sum(1 for s in statements if judge.is_attributed(s, chunk_texts))
    return attributed / len(statements)


# --- strategy evaluation and optimization ----------------------------------

@dataclass(frozen=True)
class StrategyScore:
    strategy: ChunkingStrategy
    precision: float
    recall: float

    def __post_init__(self) -> None:
        for name in ("precision", "recall"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @property
    def harmonic_mean(self) -> float:
        return harmonic_mean(self.precision, self.recall)


def harmonic_mean(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def evaluate_strategy(docs: Sequence["Document"], strategy: ChunkingStrategy,
                      testset: Sequence[QAItem], embedder: Embedder,
                      judge: RelevanceJudge, *, k: int = 4) -> StrategyScore:
    """Chunk, index, retrieve per question, and average precision/recall."""
    if not testset:
        raise EvaluationError("testset must be non-empty")
    index = VectorIndex(embedder)
    for doc in docs:
        index.add_chunks(split_document(doc, strategy))
    precisions = []
    recalls = []
    for item in testset:
        try:
            hits = index.search(item.question, SearchParams(k=k))
            chunks = [hit.chunk for hit in hits]
            precisions.append(context_precision(item.question, chunks, judge))
            recalls.append(context_recall(item.ground_truth, chunks, judge))
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(
                f"evaluation failed on question {item.question!r}: {exc}") from exc
    return StrategyScore(strategy=strategy,
                         precision=sum(precisions) / len(precisions),
                         recall=sum(recalls) / len(recalls))


def optimize(docs: Sequence["Document"], sizes: Sequence[int],
             overlaps: Sequence[int], splitters: Sequence[str],
             testset: Sequence[QAItem], embedder: Embedder,
             judge: RelevanceJudge, *, k: int = 4,
             ) -> tuple[ChunkingStrategy, list[StrategyScore]]:
    """Sweep the strategy grid, skipping infeasible (overlap >= size) cells.

    Every feasible (splitter, size, overlap) triple is evaluated; the best by
    harmonic mean is returned alongside all scores.
    """
    scores: list[StrategyScore] = []
    for splitter in splitters:
        for size in sizes:
            for overlap in overlaps:
                if overlap >= size:
                    continue
                strategy = ChunkingStrategy(splitter=splitter, size=size, overlap=overlap)
                scores.append(evaluate_strategy(docs, strategy, testset,
                                                embedder, judge, k=k))
    if not scores:
        raise EvaluationError("no feasible strategy: every overlap >= every size")
    return select_best(scores), scores


def select_best(scores: Sequence[StrategyScore]) -> ChunkingStrategy:
    """Strategy with the highest harmonic mean of (precision, recall).

    Ties break toward smaller size, then smaller overlap, then splitter order
    Character < RecursiveCharacter < TokenText.
    """
    if not scores:
        raise ValueError("scores must be non-empty")
    best = min(scores, key=lambda s: (-s.harmonic_mean, s.strategy.size,
                                      s.strategy.overlap,
                                      SPLITTERS.index(s.strategy.splitter)))
    return best.strategy


# --- reports ----------------------------------------------------------------

def report_csv(scores: Sequence[StrategyScore]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["splitter", "size", "overlap", "precision", "recall",
                     "harmonic_mean"])
    for score in scores:
        writer.writerow([score.strategy.splitter, score.strategy.size,
                         score.strategy.overlap, f"{score.precision:.6f}",
                         f"{score.recall:.6f}", f"{score.harmonic_mean:.6f}"])
    return buf.getvalue()


def report_text(scores: Sequence[StrategyScore]) -> str:
    header = f"{'splitter':<20} {'size':>6} {'overlap':>8} {'prec':>7} {'recall':>7} {'hmean':>7}"
    lines = [header, "-" * len(header)]
    for score in scores:
        lines.append(
            f"{score.strategy.splitter:<20} {score.strategy.size:>6} "
            f"{score.strategy.overlap:>8} {score.precision:>7.3f} "
            f"{score.recall:>7.3f} {score.harmonic_mean:>7.3f}")
    return "\n".join(lines) + "\n"
