"""
CVSS v3.1 base-metric model.

This module holds the eight base metrics, their levels and weights, vector
string parsing/formatting, the exploitability and impact subscores, the base
score with the standard's Roundup, severity bands and the ordinal encodings
used for error distances.
"""

import itertools
import math
from dataclasses import dataclass, fields
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple

from src.models.errors import (
    ContainsUnknown,
    InvalidValueForKind,
    MalformedVector,
    UnknownValue,
)


UNKNOWN = "UNKNOWN"
VECTOR_PREFIX = "CVSS:3.1/"


class MetricKind(str, Enum):
    """The eight CVSS v3.1 base metrics, in vector-string order."""

    AV = "AV"
    AC = "AC"
    PR = "PR"
    UI = "UI"
    S = "S"
    C = "C"
    I = "I"  # noqa: E741
    A = "A"

    @property
    def full_name(self) -> str:
        return METRIC_NAMES[self]

    @property
    def field_name(self) -> str:
        return self.value.lower()


# Vector strings use the enum order; prompts, parsed responses and reports
# use this one.
REPORT_ORDER: Tuple[MetricKind, ...] = (
    MetricKind.AC,
    MetricKind.AV,
    MetricKind.PR,
    MetricKind.UI,
    MetricKind.S,
    MetricKind.C,
    MetricKind.I,
    MetricKind.A,
)

METRIC_NAMES: Mapping[MetricKind, str] = MappingProxyType({
    MetricKind.AV: "Attack Vector",
    MetricKind.AC: "Attack Complexity",
    MetricKind.PR: "Privileges Required",
    MetricKind.UI: "User Interaction",
    MetricKind.S: "Scope",
    MetricKind.C: "Confidentiality Impact",
    MetricKind.I: "Integrity Impact",
    MetricKind.A: "Availability Impact",
})

# Canonical value order per metric (the order the standard lists them in).
METRIC_VALUES: Mapping[MetricKind, Tuple[str, ...]] = MappingProxyType({
    MetricKind.AV: ("N", "A", "L", "P"),
    MetricKind.AC: ("L", "H"),
    MetricKind.PR: ("N", "L", "H"),
    MetricKind.UI: ("N", "R"),
    MetricKind.S: ("U", "C"),
    MetricKind.C: ("H", "L", "N"),
    MetricKind.I: ("H", "L", "N"),
    MetricKind.A: ("H", "L", "N"),
})

VALUE_WORDS: Mapping[MetricKind, Mapping[str, str]] = MappingProxyType({
    MetricKind.AV: {"N": "NETWORK", "A": "ADJACENT", "L": "LOCAL", "P": "PHYSICAL"},
    MetricKind.AC: {"L": "LOW", "H": "HIGH"},
    MetricKind.PR: {"N": "NONE", "L": "LOW", "H": "HIGH"},
    MetricKind.UI: {"N": "NONE", "R": "REQUIRED"},
    MetricKind.S: {"U": "UNCHANGED", "C": "CHANGED"},
    MetricKind.C: {"H": "HIGH", "L": "LOW", "N": "NONE"},
    MetricKind.I: {"H": "HIGH", "L": "LOW", "N": "NONE"},
    MetricKind.A: {"H": "HIGH", "L": "LOW", "N": "NONE"},
})

# Ascending with weight, so AV spans 0..3.
ORDINALS: Mapping[MetricKind, Mapping[str, int]] = MappingProxyType({
    MetricKind.AV: {"P": 0, "L": 1, "A": 2, "N": 3},
    MetricKind.AC: {"H": 0, "L": 1},
    MetricKind.PR: {"H": 0, "L": 1, "N": 2},
    MetricKind.UI: {"R": 0, "N": 1},
    MetricKind.S: {"U": 0, "C": 1},
    MetricKind.C: {"N": 0, "L": 1, "H": 2},
    MetricKind.I: {"N": 0, "L": 1, "H": 2},
    MetricKind.A: {"N": 0, "L": 1, "H": 2},
})


class Severity(str, Enum):
    """Qualitative severity rating bands."""

    NONE = "None"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"


def is_valid_value(kind: MetricKind, value: str) -> bool:
    """Check whether value is a concrete level of kind."""
    return value in METRIC_VALUES[kind]


@dataclass(frozen=True)
class BaseVector:
    """
    One value per base metric.

    Slots may hold UNKNOWN when the vector is a model prediction; ground
    truth vectors never do.
    """

    av: str
    ac: str
    pr: str
    ui: str
    s: str
    c: str
    i: str
    a: str

    def __post_init__(self):
        """Validate every slot against its metric."""
        for kind in MetricKind:
            value = getattr(self, kind.field_name)
            if value != UNKNOWN and not is_valid_value(kind, value):
                raise InvalidValueForKind(
                    f"'{value}' is not a valid {kind.value} value"
                )

    def __getitem__(self, kind: MetricKind) -> str:
        return getattr(self, MetricKind(kind).field_name)

    @classmethod
    def from_mapping(cls, values: Mapping[MetricKind, str]) -> "BaseVector":
        """Build a vector from a metric → value mapping."""
        return cls(**{kind.field_name: values[kind] for kind in MetricKind})

    def as_dict(self) -> Dict[MetricKind, str]:
        return {kind: self[kind] for kind in MetricKind}

    def labels(self, order: Sequence[MetricKind] = REPORT_ORDER) -> Tuple[str, ...]:
        return tuple(self[kind] for kind in order)

    @property
    def has_unknown(self) -> bool:
        return any(getattr(self, f.name) == UNKNOWN for f in fields(self))


class WeightTable:
    """
    Immutable CVSS v3.1 weight lookup.

    Privileges Required is the only metric whose weight depends on Scope.
    Scope itself has no weight; it enters through PR and the impact formula.
    """

    _FLAT = {
        MetricKind.AV: {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.20},
        MetricKind.AC: {"L": 0.77, "H": 0.44},
        MetricKind.UI: {"N": 0.85, "R": 0.62},
        MetricKind.C: {"H": 0.56, "L": 0.22, "N": 0.00},
        MetricKind.I: {"H": 0.56, "L": 0.22, "N": 0.00},
        MetricKind.A: {"H": 0.56, "L": 0.22, "N": 0.00},
    }
    _PRIVILEGES = {
        "U": {"N": 0.85, "L": 0.62, "H": 0.27},
        "C": {"N": 0.85, "L": 0.68, "H": 0.50},
    }

    def __init__(self):
        self._flat = MappingProxyType(
            {kind: MappingProxyType(dict(values)) for kind, values in self._FLAT.items()}
        )
        self._privileges = MappingProxyType(
            {scope: MappingProxyType(dict(values)) for scope, values in self._PRIVILEGES.items()}
        )

    def weight(self, kind: MetricKind, value: str, scope: str = "U") -> float:
        kind = MetricKind(kind)
        if value == UNKNOWN:
            raise ContainsUnknown(f"{kind.value} is UNKNOWN")
        if not is_valid_value(kind, value):
            raise InvalidValueForKind(f"'{value}' is not a valid {kind.value} value")
        if kind is MetricKind.S:
            raise InvalidValueForKind("Scope has no weight of its own")
        if kind is MetricKind.PR:
            if scope not in self._privileges:
                raise InvalidValueForKind(f"'{scope}' is not a valid S value")
            return self._privileges[scope][value]
        return self._flat[kind][value]


WEIGHTS = WeightTable()


@dataclass(frozen=True)
class ScoreBreakdown:
    """Subscores, base score and severity for one vector."""

    exploitability: float
    iss: float
    impact: float
    base_score: float
    severity: Severity


def parse_vector_string(text: str) -> BaseVector:
    """
    Parse a CVSS v3.1 vector string.

    Metric tokens after the prefix may come in any order.

    Raises:
        MalformedVector: bad prefix, unknown or duplicate metric, invalid
            value, or missing metrics
    """
    if not text or not text.strip():
        raise MalformedVector("Vector string is empty")

    text = text.strip()
    if not text.startswith(VECTOR_PREFIX):
        raise MalformedVector(f"Vector must start with '{VECTOR_PREFIX}': {text!r}")

    values: Dict[MetricKind, str] = {}
    for token in text[len(VECTOR_PREFIX):].split("/"):
        key, sep, value = token.partition(":")
        if not sep:
            raise MalformedVector(f"Bad token {token!r} in {text!r}")
        try:
            kind = MetricKind(key)
        except ValueError:
            raise MalformedVector(f"Unknown metric {key!r} in {text!r}")
        if kind in values:
            raise MalformedVector(f"Duplicate metric {key!r} in {text!r}")
        if not is_valid_value(kind, value):
            raise MalformedVector(f"Invalid value {value!r} for {key} in {text!r}")
        values[kind] = value

    missing = [kind.value for kind in MetricKind if kind not in values]
    if missing:
        raise MalformedVector(f"Missing metrics {','.join(missing)} in {text!r}")

    return BaseVector.from_mapping(values)


def format_vector_string(vector: BaseVector) -> str:
    """Format a vector canonically (AV, AC, PR, UI, S, C, I, A)."""
    if vector.has_unknown:
        raise ContainsUnknown("Cannot format a vector with UNKNOWN slots")
    return VECTOR_PREFIX + "/".join(f"{kind.value}:{vector[kind]}" for kind in MetricKind)


def metric_weight(kind: MetricKind, value: str, scope: str = "U") -> float:
    """Weight of one metric level; PR uses the scope-dependent column."""
    return WEIGHTS.weight(kind, value, scope)


def _require_known(vector: BaseVector, kinds: Sequence[MetricKind]) -> None:
    unknown = [kind.value for kind in kinds if vector[kind] == UNKNOWN]
    if unknown:
        raise ContainsUnknown(f"Vector has UNKNOWN {','.join(unknown)}")


def exploitability_subscore(vector: BaseVector) -> float:
    """8.22 × AV × AC × PR × UI."""
    _require_known(vector, (MetricKind.AV, MetricKind.AC, MetricKind.PR, MetricKind.UI, MetricKind.S))
    scope = vector.s
    return (
        8.22
        * WEIGHTS.weight(MetricKind.AV, vector.av)
        * WEIGHTS.weight(MetricKind.AC, vector.ac)
        * WEIGHTS.weight(MetricKind.PR, vector.pr, scope)
        * WEIGHTS.weight(MetricKind.UI, vector.ui)
    )


def roundup(value: float) -> float:
    """
    Smallest one-decimal number >= value.

    Works on integer hundred-thousandths so that binary float noise
    (e.g. 4.000000000000001) does not round up a whole tenth.
    """
    int_input = int(math.floor(value * 100000 + 0.5))
    if int_input % 10000 == 0:
        return int_input / 100000.0
    return (int_input // 10000 + 1) / 10.0


def severity_band(score: float) -> Severity:
    """Map a 0-10 score onto its qualitative band."""
    tenths = int(round(score * 10))
    if tenths <= 0:
        return Severity.NONE
    if tenths <= 39:
        return Severity.LOW
    if tenths <= 69:
        return Severity.MEDIUM
    if tenths <= 89:
        return Severity.HIGH
    return Severity.CRITICAL


def base_score(vector: BaseVector) -> ScoreBreakdown:
    """
    Compute the CVSS v3.1 base score.

    Raises:
        ContainsUnknown: if any slot is UNKNOWN
    """
    _require_known(vector, tuple(MetricKind))

    c = WEIGHTS.weight(MetricKind.C, vector.c)
    i = WEIGHTS.weight(MetricKind.I, vector.i)
    a = WEIGHTS.weight(MetricKind.A, vector.a)
    iss = 1 - (1 - c) * (1 - i) * (1 - a)

    changed = vector.s == "C"
    if changed:
        impact = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
    else:
        impact = 6.42 * iss

    exploitability = exploitability_subscore(vector)

    if impact <= 0:
        score = 0.0
    elif changed:
        score = roundup(min(1.08 * (impact + exploitability), 10.0))
    else:
        score = roundup(min(impact + exploitability, 10.0))

    return ScoreBreakdown(
        exploitability=exploitability,
        iss=iss,
        impact=impact,
        base_score=score,
        severity=severity_band(score),
    )


def score_predicted_vector(vector: BaseVector) -> Optional[ScoreBreakdown]:
    """Score a predicted vector, or None when it has UNKNOWN slots."""
    if vector.has_unknown:
        return None
    return base_score(vector)


def ordinal_value(kind: MetricKind, value: str) -> int:
    """Severity-ordered integer for a metric level."""
    kind = MetricKind(kind)
    if value == UNKNOWN:
        raise UnknownValue(f"{kind.value} value is UNKNOWN")
    if not is_valid_value(kind, value):
        raise InvalidValueForKind(f"'{value}' is not a valid {kind.value} value")
    return ORDINALS[kind][value]


def max_ordinal_distance(kind: MetricKind) -> int:
    return len(METRIC_VALUES[MetricKind(kind)]) - 1


def enumerate_vectors() -> Iterator[BaseVector]:
    """All 2592 valid base vectors in canonical order."""
    for combo in itertools.product(*(METRIC_VALUES[kind] for kind in MetricKind)):
        yield BaseVector(*combo)
