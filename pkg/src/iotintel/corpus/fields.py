"""Classifying dataset fields into page_content, metadata, and unused.

An LLM proposes the split from field names plus a few sampled records; for
the bundled datasets there are also built-in defaults so the pipeline runs
with no model available.
"""

from __future__ import annotations

import json
import logging
from typing import Sequence

from iotintel.corpus.types import FieldSelection, RawRecord
from iotintel.llmgateway import ChatProvider, ask, extract_json_object

logger = logging.getLogger(__name__)

SAMPLE_COUNT = 3

# Built-in splits for the bundled datasets. "cls" is metadata-only: every
# field becomes metadata, resolved against the actual field names at call
# time.
DEFAULT_PAGE_CONTENT: dict[str, tuple[str, ...]] = {
    "variot_vulnerabilities": ("title", "description"),
    "variot_exploits": ("title", "description", "exploit"),
    "mitre_attack_ics": ("name", "description"),
    "threat_reports": ("content",),
    "cls": (),
}
DEFAULT_METADATA: dict[str, tuple[str, ...]] = {
    "variot_vulnerabilities": ("id", "products"),
    "variot_exploits": ("id", "products"),
    "mitre_attack_ics": ("stixId",),
    "threat_reports": ("title",),
}


class FieldSelectionError(Exception):
    """No usable selection: LLM output unparseable and no defaults exist."""


def default_field_selection(dataset_id: str,
                            field_names: Sequence[str]) -> FieldSelection:
    """The built-in split for a bundled dataset, restricted to ``field_names``."""
    if dataset_id not in DEFAULT_PAGE_CONTENT:
        raise FieldSelectionError(
            f"no built-in field selection for dataset {dataset_id!r}")
    if dataset_id == "cls":
        return FieldSelection(page_content_fields=(),
                              metadata_fields=tuple(field_names))
    content = tuple(n for n in DEFAULT_PAGE_CONTENT[dataset_id] if n in field_names)
    metadata = tuple(n for n in DEFAULT_METADATA[dataset_id] if n in field_names)
    classified = set(content) | set(metadata)
    unused = tuple(n for n in field_names if n not in classified)
    return FieldSelection(page_content_fields=content, metadata_fields=metadata,
                          unused_fields=unused)


FIELD_SELECTION_PROMPT = """\
You are preparing a security dataset for retrieval-augmented generation.
Classify every field below into exactly one group:

- "page_content": descriptive text worth embedding for semantic search
- "metadata": identifiers, enumerations, and values useful for filtering
- "unused": fields that help neither search nor filtering

Fields: {field_names}

Sample records:
{samples}

Respond with a JSON object:
{{"page_content": [...], "metadata": [...], "unused": [...]}}"""


def render_field_selection_prompt(field_names: Sequence[str],
                                  samples: Sequence[RawRecord]) -> str:
    shown = [json.dumps(record.fields, sort_keys=True, default=str)
             for record in samples[:SAMPLE_COUNT]]
    return FIELD_SELECTION_PROMPT.format(
        field_names=", ".join(field_names),
        samples="\n".join(shown),
    )


def _selection_from_llm(parsed: dict, field_names: Sequence[str],
                        warnings: list[str] | None) -> FieldSelection:
    groups = {name: [str(f) for f in parsed.get(name, [])]
              for name in ("page_content", "metadata", "unused")}
    known = set(field_names)
    assigned: dict[str, str] = {}
    # earlier groups win when the model assigns a field twice
    for group in ("page_content", "metadata", "unused"):
        for field in groups[group]:
            if field not in known:
                note = f"field selection named unknown field {field!r}; ignored"
                logger.warning(note)
                if warnings is not None:
                    warnings.append(note)
                continue
            assigned.setdefault(field, group)
    for field in field_names:
        if field not in assigned:
            note = f"field {field!r} not classified by the model; marked unused"
            logger.warning(note)
            if warnings is not None:
                warnings.append(note)
            assigned[field] = "unused"
    content_ordered: list[str] = []
    for field in groups["page_content"]:
        if assigned.get(field) == "page_content" and field not in content_ordered:
            content_ordered.append(field)
    content = tuple(content_ordered)
    metadata = tuple(f for f in field_names if assigned[f] == "metadata")
    unused = tuple(f for f in field_names if assigned[f] == "unused")
    return FieldSelection(page_content_fields=content, metadata_fields=metadata,
                          unused_fields=unused)


def select_fields(field_names: Sequence[str], samples: Sequence[RawRecord],
                  llm: ChatProvider | None = None,
                  warnings: list[str] | None = None) -> FieldSelection:
    """Partition ``field_names`` for retrieval.

    With an LLM, the model classifies fields from the names plus sampled
    records; unparseable output falls back to the built-in defaults when the
    dataset has them. Without an LLM, the defaults are returned directly.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    dataset_id = samples[0].dataset_id
    if llm is None:
        return default_field_selection(dataset_id, field_names)
    prompt = render_field_selection_prompt(field_names, samples)
    raw = ask(llm, prompt)
    try:
        parsed = extract_json_object(raw)
    except ValueError as exc:
        note = f"field-selection output unparseable ({exc}); using defaults"
        logger.warning(note)
        if warnings is not None:
            warnings.append(note)
        try:
            return default_field_selection(dataset_id, field_names)
        except FieldSelectionError:
            raise FieldSelectionError(
                f"field-selection output unparseable and dataset {dataset_id!r} "
                "has no built-in defaults") from exc
    return _selection_from_llm(parsed, field_names, warnings)
