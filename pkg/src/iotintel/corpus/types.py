"""Domain types for datasets, records, documents, and user roles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from iotintel.chunking import ChunkingStrategy

# A metadata value is a text string, a list of text strings, a finite number,
# a boolean, or null.
MetadataValue = Union[str, list, float, int, bool, None]


class MetadataValueError(ValueError):
    """Raised when a value cannot be represented as metadata."""


def coerce_metadata_value(value: object) -> MetadataValue:
    """Coerce an arbitrary JSON value into a MetadataValue.

    Lists must contain only text; numbers must be finite. Anything else is a
    MetadataValueError.
    """
    if value is None or isinstance(value, (str, bool)):
        return value
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            raise MetadataValueError(f"non-finite number: {value!r}")
        return value
    if isinstance(value, list):
        out = []
        for item in value:
            if not isinstance(item, str):
                raise MetadataValueError(
                    f"list metadata must contain only text, got {type(item).__name__}")
            out.append(item)
        return out
    raise MetadataValueError(f"unsupported metadata value type: {type(value).__name__}")


@dataclass(frozen=True)
class RawRecord:
    """One parsed source record, before field selection."""

    dataset_id: str
    record_id: str
    fields: dict

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("record_id must be non-empty")


ELEMENT_KINDS = ("text", "table", "figure", "code")


@dataclass(frozen=True)
class ContentElement:
    """One block extracted from a multimodal source (report text, table, ...)."""

    kind: str
    payload: str

    def __post_init__(self) -> None:
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind: {self.kind!r}")


@dataclass(frozen=True)
class FieldSelection:
    """Partition of a dataset's fields into content, metadata, and unused."""

    page_content_fields: tuple[str, ...]
    metadata_fields: tuple[str, ...]
    unused_fields: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for group in (self.page_content_fields, self.metadata_fields, self.unused_fields):
            for name in group:
                if name in seen:
                    raise ValueError(f"field {name!r} assigned to more than one group")
                seen.add(name)

    def to_dict(self) -> dict:
        return {
            "page_content_fields": list(self.page_content_fields),
            "metadata_fields": list(self.metadata_fields),
            "unused_fields": list(self.unused_fields),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FieldSelection":
        return cls(
            page_content_fields=tuple(data.get("page_content_fields", ())),
            metadata_fields=tuple(data.get("metadata_fields", ())),
            unused_fields=tuple(data.get("unused_fields", ())),
        )


FIELD_VALUE_TYPES = ("string", "string_list", "number", "boolean")


@dataclass(frozen=True)
class MetadataFieldInfo:
    """Schema hint handed to the query constructor: name, description, type."""

    name: str
    description: str
    value_type: str

    def __post_init__(self) -> None:
        if self.value_type not in FIELD_VALUE_TYPES:
            raise ValueError(f"unknown value_type: {self.value_type!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description,
                "value_type": self.value_type}

    @classmethod
    def from_dict(cls, data: dict) -> "MetadataFieldInfo":
        return cls(name=data["name"], description=data["description"],
                   value_type=data["value_type"])


RETRIEVAL_MODES = ("semantic", "metadata_only")


@dataclass(frozen=True)
class DatasetDescriptor:
    """Everything the pipeline needs to know about one dataset.

    ``description`` is shown verbatim to the retriever Selector;
    ``selfquery_examples`` are few-shot (query, filter) pairs for the query
    constructor. ``record_id_field`` names the source field holding each
    record's identifier.
    """

    dataset_id: str
    display_name: str
    description: str
    field_selection: FieldSelection
    chunking: ChunkingStrategy
    metadata_field_infos: tuple[MetadataFieldInfo, ...] = ()
    selfquery_examples: tuple[tuple[str, str], ...] = ()
    retrieval_mode: str = "semantic"
    record_id_field: str = "id"

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError("description must be non-empty")
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise ValueError(f"unknown retrieval_mode: {self.retrieval_mode!r}")
        empty_content = not self.field_selection.page_content_fields
        if (self.retrieval_mode == "metadata_only") != empty_content:
            raise ValueError(
                "retrieval_mode must be 'metadata_only' exactly when "
                "page_content_fields is empty")
        filterable = set(self.field_selection.metadata_fields)
        for info in self.metadata_field_infos:
            if info.name not in filterable:
                raise ValueError(
                    f"metadata_field_infos names {info.name!r}, which is not "
                    "a selected metadata field")

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "display_name": self.display_name,
            "description": self.description,
            "field_selection": self.field_selection.to_dict(),
            "chunking": self.chunking.to_dict(),
            "metadata_field_infos": [i.to_dict() for i in self.metadata_field_infos],
            "selfquery_examples": [list(pair) for pair in self.selfquery_examples],
            "retrieval_mode": self.retrieval_mode,
            "record_id_field": self.record_id_field,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetDescriptor":
        return cls(
            dataset_id=data["dataset_id"],
            display_name=data["display_name"],
            description=data["description"],
            field_selection=FieldSelection.from_dict(data["field_selection"]),
            chunking=ChunkingStrategy.from_dict(data["chunking"]),
            metadata_field_infos=tuple(
                MetadataFieldInfo.from_dict(i) for i in data.get("metadata_field_infos", ())),
            selfquery_examples=tuple(
                (pair[0], pair[1]) for pair in data.get("selfquery_examples", ())),
            retrieval_mode=data.get("retrieval_mode", "semantic"),
            record_id_field=data.get("record_id_field", "id"),
        )


@dataclass(frozen=True)
class Document:
    """A source record rendered into retrievable form: text plus metadata."""

    doc_id: str
    dataset_id: str
    source_record_id: str
    page_content: str
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "dataset_id": self.dataset_id,
            "source_record_id": self.source_record_id,
            "page_content": self.page_content,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Document":
        return cls(
            doc_id=data["doc_id"],
            dataset_id=data["dataset_id"],
            source_record_id=data["source_record_id"],
            page_content=data["page_content"],
            metadata=dict(data["metadata"]),
        )


@dataclass(frozen=True)
class RoleBackground:
    """What a user archetype knows, wants, and expects from an answer."""

    knowledge: str
    goals: str
    requirements: str

    def __post_init__(self) -> None:
        for name in ("knowledge", "goals", "requirements"):
            if not getattr(self, name):
                raise ValueError(f"background {name} must be non-empty")

    def to_dict(self) -> dict:
        return {"knowledge": self.knowledge, "goals": self.goals,
                "requirements": self.requirements}

    @classmethod
    def from_dict(cls, data: dict) -> "RoleBackground":
        return cls(knowledge=data["knowledge"], goals=data["goals"],
                   requirements=data["requirements"])


BUILTIN_ROLES = ("Consumer", "SecurityAnalyst", "TechnicalOfficer", "Developer", "Trainer")


@dataclass(frozen=True)
class RoleProfile:
    """A user archetype: background for prompt tailoring plus example usage."""

    role: str
    background: RoleBackground
    actions: tuple[str, ...] = ()
    example_queries: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "background": self.background.to_dict(),
            "actions": list(self.actions),
            "example_queries": list(self.example_queries),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoleProfile":
        return cls(
            role=data["role"],
            background=RoleBackground.from_dict(data["background"]),
            actions=tuple(data.get("actions", ())),
            example_queries=tuple(data.get("example_queries", ())),
        )
