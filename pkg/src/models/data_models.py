"""
Data models for the CVSS scoring bench.

This module contains the records that flow through the pipeline: raw CVE
records, filtered dataset entries, the ingest filter report, prompt settings
and per-model predictions.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.models.cvss import (
    REPORT_ORDER,
    UNKNOWN,
    BaseVector,
    MetricKind,
    format_vector_string,
    parse_vector_string,
)
from src.models.errors import (
    ConfigError,
    InvalidValueForKind,
    MalformedRecord,
    MalformedVector,
    SchemaMismatch,
)


CVE_ID_PATTERN = re.compile(r"^CVE-\d{4}-\d{4,}$")
MIN_PUBLISHED_YEAR = 2019
ALLOWED_SHOTS = (0, 2, 5, 10)


def cve_sort_key(cve_id: str) -> Tuple[int, int, str]:
    """
    Sort key for "sorted by cve_id" outputs: numeric (year, sequence), not
    lexicographic, so CVE-2021-9999 comes before CVE-2021-10000.

    Ids that do not parse sort first, by their text.
    """
    parts = cve_id.split("-")
    try:
        return int(parts[1]), int(parts[2]), cve_id
    except (IndexError, ValueError):
        return 0, 0, cve_id


@dataclass
class RawCveRecord:
    """A CVE record as extracted from its JSON document."""

    cve_id: str
    descriptions: List[Tuple[str, str]] = field(default_factory=list)
    cvss31_vector: Optional[str] = None
    published_year: Optional[int] = None

    def __post_init__(self):
        """Validate the identifier."""
        if not self.cve_id or not CVE_ID_PATTERN.match(self.cve_id):
            raise MalformedRecord(f"Invalid CVE identifier: {self.cve_id!r}")


@dataclass
class CveEntry:
    """A dataset entry: English description plus ground-truth vector."""

    cve_id: str
    description: str
    truth: BaseVector
    published_year: int

    def __post_init__(self):
        """Validate entry invariants."""
        if not CVE_ID_PATTERN.match(self.cve_id):
            raise MalformedRecord(f"Invalid CVE identifier: {self.cve_id!r}")
        if not self.description or not self.description.strip():
            raise MalformedRecord("Description must not be empty")
        if self.truth.has_unknown:
            raise MalformedRecord("Ground truth must not contain UNKNOWN")
        if self.published_year < MIN_PUBLISHED_YEAR:
            raise MalformedRecord(f"Entries must be published in {MIN_PUBLISHED_YEAR} or later")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for storage."""
        return {
            "cve_id": self.cve_id,
            "description": self.description,
            "vector": format_vector_string(self.truth),
            "year": self.published_year,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CveEntry":
        """Create from a stored dictionary."""
        missing = [key for key in ("cve_id", "description", "vector", "year") if key not in data]
        if missing:
            raise SchemaMismatch(f"Dataset record missing fields: {', '.join(missing)}")
        try:
            return cls(
                cve_id=data["cve_id"],
                description=data["description"],
                truth=parse_vector_string(data["vector"]),
                published_year=int(data["year"]),
            )
        except (MalformedVector, MalformedRecord, ValueError, TypeError) as e:
            raise SchemaMismatch(f"Invalid dataset record {data.get('cve_id')!r}: {e}")


class RejectionReason(str, Enum):
    """Why a raw record did not make it into the dataset, in rule order."""

    MALFORMED = "malformed"
    PRE_2019 = "pre_2019"
    NOT_V31 = "not_v31"
    INCOMPLETE_METRICS = "incomplete_metrics"
    EMPTY_DESCRIPTION = "empty_description"
    NON_ENGLISH = "non_english"


@dataclass
class FilterReport:
    """Per-reason rejection counts plus the number of kept records."""

    counts: Dict[RejectionReason, int] = field(
        default_factory=lambda: {reason: 0 for reason in RejectionReason}
    )
    kept: int = 0

    def reject(self, reason: RejectionReason, count: int = 1) -> None:
        self.counts[reason] = self.counts.get(reason, 0) + count

    @property
    def rejected(self) -> int:
        return sum(self.counts.values())

    @property
    def total(self) -> int:
        return self.kept + self.rejected

    def as_rows(self) -> List[Tuple[str, int]]:
        """(reason, count) rows in rule order, followed by kept and total."""
        rows = [(reason.value, self.counts.get(reason, 0)) for reason in RejectionReason]
        rows.append(("kept", self.kept))
        rows.append(("total", self.total))
        return rows


@dataclass(frozen=True)
class ShotExample:
    """A worked example shown to the model before the query batch."""

    description: str
    labels: BaseVector

    def __post_init__(self):
        if self.labels.has_unknown:
            raise ConfigError("Shot example labels must be complete")


@dataclass
class PromptSpec:
    """Few-shot prompt settings."""

    shots: int = 2
    shot_examples: Tuple[ShotExample, ...] = ()
    batch_size: int = 20

    def __post_init__(self):
        """Validate prompt settings."""
        if self.shots not in ALLOWED_SHOTS:
            raise ConfigError(f"shots must be one of {ALLOWED_SHOTS}, got {self.shots}")
        if len(self.shot_examples) != self.shots:
            raise ConfigError(
                f"Expected {self.shots} shot examples, got {len(self.shot_examples)}"
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")


@dataclass(frozen=True)
class PredictionSet:
    """One model's eight labels for one CVE."""

    cve_id: str
    model_id: str
    labels: BaseVector

    @property
    def valid(self) -> bool:
        return not self.labels.has_unknown

    def __getitem__(self, kind: MetricKind) -> str:
        return self.labels[kind]

    @classmethod
    def all_unknown(cls, cve_id: str, model_id: str) -> "PredictionSet":
        return cls(cve_id=cve_id, model_id=model_id, labels=BaseVector(*([UNKNOWN] * 8)))

    def to_row(self) -> Dict[str, Any]:
        """Flat row in prediction-CSV column order."""
        row: Dict[str, Any] = {"cve_id": self.cve_id, "model_id": self.model_id}
        for kind in REPORT_ORDER:
            row[kind.value] = self.labels[kind]
        row["valid"] = self.valid
        return row

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "PredictionSet":
        """Rebuild from a prediction-CSV row; the stored flag is re-derived."""
        try:
            labels = BaseVector.from_mapping({kind: str(row[kind.value]) for kind in MetricKind})
            return cls(cve_id=str(row["cve_id"]), model_id=str(row["model_id"]), labels=labels)
        except KeyError as e:
            raise SchemaMismatch(f"Prediction row missing column {e}")
        except InvalidValueForKind as e:
            raise SchemaMismatch(f"Prediction row for {row.get('cve_id')!r} is invalid: {e}")


PREDICTION_COLUMNS: Tuple[str, ...] = (
    ("cve_id", "model_id") + tuple(kind.value for kind in REPORT_ORDER) + ("valid",)
)


class ProviderConfig(BaseModel):
    """
    One chat-completion provider, as declared in the providers file.

    The credential itself is never stored here, only the name of the
    environment variable that holds it.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    provider_id: str = Field(min_length=1)
    endpoint: str
    model_name: str = Field(min_length=1)
    temperature: float = Field(default=0.0, ge=0.0, le=2.0)
    max_parallel: int = Field(default=1, ge=1)
    credential_env_var: str = Field(min_length=1)
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    extra_body: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("endpoint")
    @classmethod
    def _check_endpoint(cls, value: str) -> str:
        if not value.startswith(("http://", "https://")):
            raise ValueError(f"endpoint must be an http(s) URL, got {value!r}")
        return value

    @field_validator("provider_id")
    @classmethod
    def _check_provider_id(cls, value: str) -> str:
        if not re.match(r"^[A-Za-z0-9_.-]+$", value):
            raise ValueError(f"provider_id may only use letters, digits, '_', '.', '-': {value!r}")
        return value

    def redacted(self) -> Dict[str, Any]:
        """Loggable view of the config."""
        return {
            "provider_id": self.provider_id,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_parallel": self.max_parallel,
            "credential_env_var": self.credential_env_var,
        }
