"""Loading dataset descriptors, including the bundled ones."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from iotintel.corpus.types import DatasetDescriptor

BUILTIN_DATASET_IDS = (
    "variot_vulnerabilities",
    "variot_exploits",
    "mitre_attack_ics",
    "threat_reports",
    "cls",
)


def load_descriptor(path: str | Path) -> DatasetDescriptor:
    with open(path, encoding="utf-8") as fh:
        return DatasetDescriptor.from_dict(json.load(fh))


def save_descriptor(descriptor: DatasetDescriptor, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(descriptor.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def builtin_descriptors() -> dict[str, DatasetDescriptor]:
    """The bundled dataset descriptors, keyed by dataset_id."""
    root = resources.files("iotintel").joinpath("data/descriptors")
    out: dict[str, DatasetDescriptor] = {}
    for dataset_id in BUILTIN_DATASET_IDS:
        text = root.joinpath(f"{dataset_id}.json").read_text(encoding="utf-8")
        descriptor = DatasetDescriptor.from_dict(json.loads(text))
        out[descriptor.dataset_id] = descriptor
    return out


def get_descriptor(dataset_id: str) -> DatasetDescriptor:
    descriptors = builtin_descriptors()
    if dataset_id not in descriptors:
        known = ", ".join(sorted(descriptors))
        raise KeyError(f"unknown dataset {dataset_id!r}; bundled datasets: {known}")
    return descriptors[dataset_id]
