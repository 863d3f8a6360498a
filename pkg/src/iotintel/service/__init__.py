"""HTTP service and command-line interface over the assistant engine."""

from iotintel.service.config import AppConfig, ConfigError, load_config
from iotintel.service.engine import (
    AssistantEngine,
    EngineError,
    IngestSummary,
    UnknownDatasetError,
    UnknownRoleError,
)

__all__ = [
    "AppConfig",
    "AssistantEngine",
    "ConfigError",
    "EngineError",
    "IngestSummary",
    "UnknownDatasetError",
    "UnknownRoleError",
    "load_config",
]
