"""The assistant engine: per-dataset corpora, retrievers, answering, eval.

Each registered dataset owns one vector index, so a retriever can never
return another dataset's chunks. Ingestion is keyed by content digest and
replaces the dataset's corpus when the file changes; repeating a file is a
no-op. State persists under the data directory when one is configured.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from iotintel.chunking import metadata_chunk, split_document
from iotintel.corpus import (
    DatasetDescriptor,
    RoleProfile,
    builtin_descriptors,
    builtin_roles,
    load_descriptor,
    load_role,
)
from iotintel.corpus.ingest import build_documents, parse_tabular_dataset
from iotintel.evalharness import run_comparison
from iotintel.index import HashedTrigramEmbedder, SearchParams, VectorIndex
from iotintel.llmgateway import ChatProvider, ask
from iotintel.orchestrator import Answer, answer
from iotintel.selfquery import SelfQueryRetriever

logger = logging.getLogger(__name__)


class EngineError(Exception):
    pass


class UnknownRoleError(EngineError):
    def __init__(self, role: str, known: Sequence[str]):
        self.role = role
        self.known = tuple(known)
        super().__init__(f"unknown role {role!r}; registered roles: "
                         f"{', '.join(known)}")


class UnknownDatasetError(EngineError):
    def __init__(self, dataset_id: str, known: Sequence[str]):
        self.dataset_id = dataset_id
        self.known = tuple(known)
        super().__init__(f"unknown dataset {dataset_id!r}; registered "
                         f"datasets: {', '.join(known)}")


@dataclass(frozen=True)
class IngestSummary:
    dataset_id: str
    records: int
    documents: int
    chunks: int
    digest: str
    warnings: tuple[str, ...] = ()
    cached: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "records": self.records,
            "documents": self.documents,
            "chunks": self.chunks,
            "digest": self.digest,
            "warnings": list(self.warnings),
            "cached": self.cached,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IngestSummary":
        return cls(dataset_id=data["dataset_id"], records=data["records"],
                   documents=data["documents"], chunks=data["chunks"],
                   digest=data["digest"],
                   warnings=tuple(data.get("warnings", ())),
                   cached=data.get("cached", False))


class AssistantEngine:
    def __init__(self, descriptors: Sequence[DatasetDescriptor],
                 roles: Mapping[str, RoleProfile], llm: ChatProvider, *,
                 embedder=None, data_dir: str | Path | None = None,
                 search_k: int = 4, min_score: float = -1.0):
        if not descriptors:
            raise EngineError("at least one dataset must be registered")
        if not roles:
            raise EngineError("at least one role must be registered")
        self.descriptors: dict[str, DatasetDescriptor] = {
            d.dataset_id: d for d in descriptors
        }
        self.roles = dict(roles)
        self.llm = llm
        self.embedder = embedder or HashedTrigramEmbedder()
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.params = SearchParams(k=search_k, min_score=min_score)
        self._indexes: dict[str, VectorIndex] = {}
        self._summaries: dict[str, IngestSummary] = {}
        self._ingest_lock = threading.Lock()
        if self.data_dir is not None:
            self._load_state()

    @classmethod
    def from_config(cls, config, llm: ChatProvider) -> "AssistantEngine":
        builtin = builtin_descriptors()
        descriptors = []
        for dataset_id in config.datasets:
            if dataset_id not in builtin:
                raise EngineError(f"config names unknown dataset "
                                  f"{dataset_id!r}")
            descriptors.append(builtin[dataset_id])
        if config.descriptor_dir is not None:
            for path in sorted(config.descriptor_dir.glob("*.json")):
                descriptors.append(load_descriptor(path))
        roles = builtin_roles()
        if config.role_dir is not None:
            for path in sorted(config.role_dir.glob("*.json")):
                profile = load_role(path)
                roles[profile.role] = profile
        return cls(descriptors, roles, llm,
                   embedder=HashedTrigramEmbedder(config.embedder_dimension),
                   data_dir=config.data_dir, search_k=config.search_k,
                   min_score=config.min_score)

    # --- state persistence --------------------------------------------------

    def _index_path(self, dataset_id: str) -> Path:
        return self.data_dir / "indexes" / f"{dataset_id}.ndjson"

    def _state_path(self) -> Path:
        return self.data_dir / "ingest_state.json"

    def _load_state(self) -> None:
        state_path = self._state_path()
        if state_path.is_file():
            state = json.loads(state_path.read_text(encoding="utf-8"))
            for dataset_id, summary in state.items():
                if dataset_id in self.descriptors:
                    self._summaries[dataset_id] = \
                        IngestSummary.from_dict(summary)
        for dataset_id in self.descriptors:
            path = self._index_path(dataset_id)
            if path.is_file():
                self._indexes[dataset_id] = \
                    VectorIndex.load(path, embedder=self.embedder)

    def _save_state(self, dataset_id: str) -> None:
        if self.data_dir is None:
            return
        index_path = self._index_path(dataset_id)
        index_path.parent.mkdir(parents=True, exist_ok=True)
        self._indexes[dataset_id].save(index_path)
        state = {ds: summary.to_dict()
                 for ds, summary in self._summaries.items()}
        self._state_path().parent.mkdir(parents=True, exist_ok=True)
        self._state_path().write_text(
            json.dumps(state, indent=1, sort_keys=True), encoding="utf-8")

    # --- corpus -------------------------------------------------------------

    def index_for(self, dataset_id: str) -> VectorIndex:
        if dataset_id not in self.descriptors:
            raise UnknownDatasetError(dataset_id, list(self.descriptors))
        if dataset_id not in self._indexes:
            self._indexes[dataset_id] = VectorIndex(self.embedder)
        return self._indexes[dataset_id]

    def ingest(self, dataset_id: str, *, path: str | Path | None = None,
               data: bytes | str | None = None) -> IngestSummary:
        if dataset_id not in self.descriptors:
            raise UnknownDatasetError(dataset_id, list(self.descriptors))
        if (path is None) == (data is None):
            raise EngineError("provide exactly one of path or data")
        if path is not None:
            data = Path(path).read_bytes()
        elif isinstance(data, str):
            data = data.encode("utf-8")
        descriptor = self.descriptors[dataset_id]
        digest = hashlib.sha256(data).hexdigest()
        with self._ingest_lock:
            previous = self._summaries.get(dataset_id)
            if previous is not None and previous.digest == digest:
                return replace(previous, cached=True)
            warnings: list[str] = []
            records = parse_tabular_dataset(data, descriptor, warnings)
            documents = build_documents(records, descriptor, warnings)
            chunks = []
            for doc in documents:
                if descriptor.retrieval_mode == "metadata_only":
                    chunks.append(metadata_chunk(doc))
                else:
                    chunks.extend(split_document(doc, descriptor.chunking))
            index = VectorIndex(self.embedder)
            index.add_chunks(chunks)
            self._indexes[dataset_id] = index
            summary = IngestSummary(dataset_id, len(records), len(documents),
                                    len(chunks), digest, tuple(warnings))
            self._summaries[dataset_id] = summary
            self._save_state(dataset_id)
            logger.info("ingested %s: %d records, %d documents, %d chunks",
                        dataset_id, len(records), len(documents), len(chunks))
            return summary

    # --- answering and evaluation -------------------------------------------

    @property
    def retrievers(self) -> list[SelfQueryRetriever]:
        return [SelfQueryRetriever(descriptor, self.index_for(dataset_id),
                                   self.llm, self.params)
                for dataset_id, descriptor in self.descriptors.items()]

    def ask(self, role_name: str, query: str) -> Answer:
        role = self.roles.get(role_name)
        if role is None:
            raise UnknownRoleError(role_name, list(self.roles))
        return answer(role, query, self.retrievers, self.llm)

    def compare(self, role_name: str, question: str,
                judge: ChatProvider | None = None) -> dict:
        """Assistant answer vs the same LLM answering without retrieval."""
        if role_name not in self.roles:
            raise UnknownRoleError(role_name, list(self.roles))
        assistant = self.ask(role_name, question).text
        baseline = ask(self.llm, question)
        run = run_comparison(role_name, question, assistant, baseline,
                             judge if judge is not None else self.llm)
        return {
            "role": run.role,
            "question": run.question,
            "assistant_answer": run.answer_a,
            "baseline_answer": run.answer_b,
            "scores": {label: dict(per_metric)
                       for label, per_metric in run.scorecard.scores.items()},
            "judge_model": run.judge_model,
        }

    # --- introspection ------------------------------------------------------

    def retriever_info(self) -> list[dict]:
        out = []
        for dataset_id, descriptor in self.descriptors.items():
            index = self._indexes.get(dataset_id)
            out.append({
                "dataset_id": dataset_id,
                "display_name": descriptor.display_name,
                "description": descriptor.description,
                "retrieval_mode": descriptor.retrieval_mode,
                "chunking": {
                    "splitter": descriptor.chunking.splitter,
                    "size": descriptor.chunking.size,
                    "overlap": descriptor.chunking.overlap,
                },
                "chunks": 0 if index is None else len(index),
            })
        return out

    def role_info(self) -> list[dict]:
        return [profile.to_dict() for profile in self.roles.values()]

    def health(self) -> dict:
        return {
            "status": "ok",
            "retrievers": len(self.descriptors),
            "roles": len(self.roles),
            "datasets": list(self.descriptors),
        }
