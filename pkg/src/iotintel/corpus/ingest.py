"""Parsing raw dataset bytes into records and documents."""

from __future__ import annotations

import json
import logging
from typing import Callable, Sequence

from iotintel.corpus.types import (
    ContentElement,
    DatasetDescriptor,
    Document,
    MetadataValueError,
    RawRecord,
    coerce_metadata_value,
)

logger = logging.getLogger(__name__)


class TabularParseError(Exception):
    """Malformed dataset bytes; ``byte_offset`` locates the failure."""

    def __init__(self, message: str, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"{message} (byte offset {byte_offset})")


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _flatten(obj: dict, prefix: str = "") -> dict:
    """Flatten nested objects with dot-joined keys: {"a": {"b": 1}} -> {"a.b": 1}."""
    flat: dict = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def _coerce_fields(fields: dict, record_label: str,
                   warnings: list[str] | None) -> dict:
    coerced = {}
    for name, value in fields.items():
        try:
            coerced[name] = coerce_metadata_value(value)
        except MetadataValueError:
            # keep the data rather than dropping the record
            coerced[name] = json.dumps(value, sort_keys=True)
            note = f"field {name!r} of {record_label} stringified (unsupported value type)"
            logger.warning(note)
            if warnings is not None:
                warnings.append(note)
    return coerced


def parse_tabular_dataset(data: bytes, descriptor: DatasetDescriptor,
                          warnings: list[str] | None = None) -> list[RawRecord]:
    """Parse UTF-8 JSON bytes (array of objects, or one object per line).

    Nested objects are flattened with dot-joined keys. Objects missing the
    descriptor's record-id field are skipped and counted in a warning summary.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TabularParseError(f"not valid UTF-8: {exc.reason}", exc.start) from exc

    objects: list[tuple[dict, int]] = []
    stripped = text.lstrip()
    if stripped.startswith("["):
        lead = len(text) - len(stripped)
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TabularParseError(f"malformed JSON: {exc.msg}",
                                    _byte_offset(text, exc.pos)) from exc
        for item in parsed:
            if not isinstance(item, dict):
                raise TabularParseError(
                    f"array element is {type(item).__name__}, expected object", lead)
            objects.append((item, lead))
    else:
        char_pos = 0
        for line in text.splitlines(keepends=True):
            content = line.strip()
            if content:
                try:
                    item = json.loads(content)
                except json.JSONDecodeError as exc:
                    raise TabularParseError(
                        f"malformed JSON line: {exc.msg}",
                        _byte_offset(text, char_pos + line.index(content[0]) + exc.pos),
                    ) from exc
                if not isinstance(item, dict):
                    raise TabularParseError(
                        f"line holds {type(item).__name__}, expected object",
                        _byte_offset(text, char_pos))
                objects.append((item, char_pos))
            char_pos += len(line)

    records: list[RawRecord] = []
    skipped = 0
    id_field = descriptor.record_id_field
    for position, (obj, _) in enumerate(objects):
        fields = _flatten(obj)
        raw_id = fields.get(id_field)
        if raw_id is None or raw_id == "":
            skipped += 1
            continue
        record_id = raw_id if isinstance(raw_id, str) else json.dumps(raw_id)
        label = f"record {record_id!r}"
        records.append(RawRecord(
            dataset_id=descriptor.dataset_id,
            record_id=record_id,
            fields=_coerce_fields(fields, label, warnings),
        ))
    if skipped:
        note = (f"skipped {skipped} record(s) in {descriptor.dataset_id} "
                f"missing the {id_field!r} field")
        logger.warning(note)
        if warnings is not None:
            warnings.append(note)
    return records


def parse_element_stream(data: bytes) -> list[ContentElement]:
    """Parse newline-delimited {kind, payload} objects, preserving order."""
    elements = []
    for line in data.decode("utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        elements.append(ContentElement(kind=obj["kind"], payload=obj["payload"]))
    return elements


def summarize_elements(elements: Sequence[ContentElement],
                       converters: dict[str, Callable[[str], str]] | None = None,
                       ) -> str:
    """Render a multimodal element stream to text, in stream order.

    Text elements pass through; every other kind present must have a
    converter (LLM-backed in production, scripted in tests). Blocks are
    joined by blank lines.
    """
    converters = converters or {}
    missing = sorted({e.kind for e in elements
                      if e.kind != "text" and e.kind not in converters})
    if missing:
        raise ValueError(f"no converter for element kind(s): {', '.join(missing)}")
    blocks = []
    for element in elements:
        if element.kind == "text":
            blocks.append(element.payload)
        else:
            blocks.append(converters[element.kind](element.payload))
    return "\n\n".join(blocks)


def _render_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return "; ".join(str(item) for item in value)
    if value is None:
        return ""
    return str(value)


def build_documents(records: Sequence[RawRecord], descriptor: DatasetDescriptor,
                    warnings: list[str] | None = None) -> list[Document]:
    """Assemble documents: selected content fields joined by blank lines,
    selected metadata fields carried as-is.

    A selected field missing from a record is omitted with a warning.
    Metadata-only datasets yield empty page_content.
    """
    selection = descriptor.field_selection
    documents = []
    for record in records:
        parts = []
        for name in selection.page_content_fields:
            if name in record.fields:
                parts.append(_render_value(record.fields[name]))
            else:
                note = (f"record {record.record_id!r} in {descriptor.dataset_id} "
                        f"is missing content field {name!r}")
                logger.warning(note)
                if warnings is not None:
                    warnings.append(note)
        metadata = {name: record.fields[name] for name in selection.metadata_fields
                    if name in record.fields}
        documents.append(Document(
            doc_id=f"{descriptor.dataset_id}/{record.record_id}",
            dataset_id=descriptor.dataset_id,
            source_record_id=record.record_id,
            page_content="\n\n".join(parts),
            metadata=metadata,
        ))
    return documents
