"""Application configuration: data locations, providers, serving defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from iotintel.corpus import BUILTIN_DATASET_IDS
from iotintel.llmgateway import ProviderProfile


class ConfigError(Exception):
    pass


@dataclass
class AppConfig:
    """Everything the engine and server need to start.

    ``data_dir`` is owned by the engine and created on demand; directories
    the user points at (descriptors, roles) must already exist.
    """

    data_dir: Path = Path("iotintel-data")
    host: str = "127.0.0.1"
    port: int = 8080
    embedder_dimension: int = 384
    search_k: int = 4
    min_score: float = -1.0
    api_token_env: str | None = None
    datasets: tuple[str, ...] = BUILTIN_DATASET_IDS
    descriptor_dir: Path | None = None
    role_dir: Path | None = None
    providers: dict[str, ProviderProfile] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if not self.datasets:
            raise ConfigError("at least one dataset must be registered")
        for label, value in (("descriptor_dir", self.descriptor_dir),
                             ("role_dir", self.role_dir)):
            if value is not None:
                path = Path(value)
                if not path.is_dir():
                    raise ConfigError(f"{label} does not exist: {path}")
                setattr(self, label, path)

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        known = {"data_dir", "host", "port", "embedder_dimension", "search_k",
                 "min_score", "api_token_env", "datasets", "descriptor_dir",
                 "role_dir", "providers"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        kwargs = dict(data)
        if "datasets" in kwargs:
            kwargs["datasets"] = tuple(kwargs["datasets"])
        if "providers" in kwargs:
            kwargs["providers"] = {
                name: ProviderProfile.from_dict(profile)
                for name, profile in kwargs["providers"].items()
            }
        return cls(**kwargs)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Read a JSON config file; no file means built-in defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return AppConfig.from_dict(data)
