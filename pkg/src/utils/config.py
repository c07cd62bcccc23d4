"""
Configuration management for the CVSS scoring bench.

This module handles loading and validating environment variables, the
provider configuration file and command-line overrides.
"""

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, List, Optional

from dotenv import load_dotenv
from pydantic import TypeAdapter, ValidationError

from src.models.data_models import ALLOWED_SHOTS, ProviderConfig
from src.models.errors import ConfigError

# Load environment variables from .env file
load_dotenv()

RUN_MODES = ("live", "replay", "record")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class AppConfig:
    """Configuration class containing all application settings."""

    # Input and output locations
    data_dir: Optional[str] = None
    dataset_path: str = "data/dataset.jsonl"
    predictions_path: str = "data/predictions.csv"
    providers_file: Optional[str] = None
    cache_path: str = "data/replay_cache.jsonl"
    out_dir: str = "out"

    # Prompting
    shots: int = 2
    batch_size: int = 20
    mode: str = "replay"

    # Provider requests
    max_retries: int = 5
    backoff_base: float = 1.0
    request_timeout: float = 120.0

    # Meta classification
    seed: int = 42
    rf_trees: int = 100

    # Logging Configuration
    log_level: str = "WARNING"
    log_file: Optional[str] = None

    def __post_init__(self):
        """Post-initialization validation."""
        if self.shots not in ALLOWED_SHOTS:
            raise ConfigError(f"shots must be one of {ALLOWED_SHOTS}, got {self.shots}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.mode not in RUN_MODES:
            raise ConfigError(f"mode must be one of {RUN_MODES}, got {self.mode!r}")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be at least 1")
        if self.backoff_base < 0:
            raise ConfigError("backoff_base must not be negative")
        if self.request_timeout <= 0:
            raise ConfigError("request_timeout must be positive")
        if self.rf_trees < 1:
            raise ConfigError("rf_trees must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must not be negative")
        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigError(f"Unknown log level {self.log_level!r}")

    def with_overrides(self, **overrides: Any) -> "AppConfig":
        """Return a copy with the non-None overrides applied (re-validated)."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes) if changes else self


def load_config() -> AppConfig:
    """
    Load configuration from environment variables.

    Returns:
        AppConfig: Configuration object with all settings

    Raises:
        ConfigError: If a value is missing its expected type or fails validation
    """
    try:
        return AppConfig(
            data_dir=os.getenv("CVSSBENCH_DATA_DIR"),
            dataset_path=os.getenv("CVSSBENCH_DATASET", "data/dataset.jsonl"),
            predictions_path=os.getenv("CVSSBENCH_PREDICTIONS", "data/predictions.csv"),
            providers_file=os.getenv("CVSSBENCH_PROVIDERS_FILE"),
            cache_path=os.getenv("CVSSBENCH_CACHE", "data/replay_cache.jsonl"),
            out_dir=os.getenv("CVSSBENCH_OUT", "out"),
            shots=int(os.getenv("CVSSBENCH_SHOTS", "2")),
            batch_size=int(os.getenv("CVSSBENCH_BATCH_SIZE", "20")),
            mode=os.getenv("CVSSBENCH_MODE", "replay").lower(),
            max_retries=int(os.getenv("CVSSBENCH_MAX_RETRIES", "5")),
            backoff_base=float(os.getenv("CVSSBENCH_BACKOFF_BASE", "1.0")),
            request_timeout=float(os.getenv("CVSSBENCH_REQUEST_TIMEOUT", "120")),
            seed=int(os.getenv("CVSSBENCH_SEED", "42")),
            rf_trees=int(os.getenv("CVSSBENCH_RF_TREES", "100")),
            log_level=os.getenv("LOG_LEVEL", "WARNING"),
            log_file=os.getenv("LOG_FILE") or None,
        )
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"Failed to load configuration: {e}")


_PROVIDER_LIST = TypeAdapter(List[ProviderConfig])


def load_providers(path: str) -> List[ProviderConfig]:
    """
    Load and validate the provider configuration file.

    The file holds a JSON list of provider objects; provider ids must be
    unique.

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"Provider file not found: {path}")

    try:
        raw = json.loads(file_path.read_text(encoding="utf-8"))
        providers = _PROVIDER_LIST.validate_python(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Provider file {path} is not valid JSON: {e}")
    except ValidationError as e:
        raise ConfigError(f"Provider file {path} is invalid: {e}")

    if not providers:
        raise ConfigError(f"Provider file {path} declares no providers")

    ids = [provider.provider_id for provider in providers]
    duplicates = sorted({pid for pid in ids if ids.count(pid) > 1})
    if duplicates:
        raise ConfigError(f"Duplicate provider ids: {', '.join(duplicates)}")

    return providers


# Global configuration instance
config = load_config()
