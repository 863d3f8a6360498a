"""Dataset descriptors, ingestion, field selection, and role profiles."""

from iotintel.corpus.descriptors import (
    BUILTIN_DATASET_IDS,
    builtin_descriptors,
    get_descriptor,
    load_descriptor,
    save_descriptor,
)
from iotintel.corpus.fields import (
    FieldSelectionError,
    default_field_selection,
    render_field_selection_prompt,
    select_fields,
)
from iotintel.corpus.ingest import (
    TabularParseError,
    build_documents,
    parse_element_stream,
    parse_tabular_dataset,
    summarize_elements,
)
from iotintel.corpus.roles import builtin_roles, get_role, load_role
from iotintel.corpus.types import (
    BUILTIN_ROLES,
    ContentElement,
    DatasetDescriptor,
    Document,
    FieldSelection,
    MetadataFieldInfo,
    MetadataValueError,
    RawRecord,
    RoleBackground,
    RoleProfile,
    coerce_metadata_value,
)

__all__ = [
    "BUILTIN_DATASET_IDS",
    "BUILTIN_ROLES",
    "ContentElement",
    "DatasetDescriptor",
    "Document",
    "FieldSelection",
    "FieldSelectionError",
    "MetadataFieldInfo",
    "MetadataValueError",
    "RawRecord",
    "RoleBackground",
    "RoleProfile",
    "TabularParseError",
    "build_documents",
    "builtin_descriptors",
    "builtin_roles",
    "coerce_metadata_value",
    "default_field_selection",
    "get_descriptor",
    "get_role",
    "load_descriptor",
    "load_role",
    "parse_element_stream",
    "parse_tabular_dataset",
    "render_field_selection_prompt",
    "save_descriptor",
    "select_fields",
    "summarize_elements",
]
