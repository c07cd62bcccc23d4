"""
Exception hierarchy for the CVSS scoring bench.

Every error raised by the package derives from BenchError. The three direct
subclasses map onto command-line exit codes, so the CLI never has to know
about individual error types.
"""

from typing import Iterable, List, Optional


class BenchError(Exception):
    """Base class for all bench errors."""

    exit_code = 1


class InputError(BenchError):
    """Bad input data, arguments or configuration."""

    exit_code = 2


class ProviderFailure(BenchError):
    """A chat-completion provider could not deliver a response."""

    exit_code = 3


class InvariantViolation(BenchError):
    """An internal consistency check failed."""

    exit_code = 4


class ConfigError(InputError):
    """Configuration is missing or invalid."""
    pass


# CVSS core

class MalformedVector(InputError):
    """Vector string could not be parsed."""
    pass


class ContainsUnknown(InputError):
    """Operation requires a vector without UNKNOWN slots."""
    pass


class InvalidValueForKind(InputError):
    """Metric value does not belong to the metric kind."""
    pass


class UnknownValue(InputError):
    """UNKNOWN was supplied where a concrete level is required."""
    pass


# Ingest

class MalformedRecord(InputError):
    """CVE record document could not be parsed."""
    pass


class SchemaMismatch(InputError):
    """Persisted dataset does not carry the expected fields."""
    pass


class IoFailure(InputError):
    """File could not be read or written."""
    pass


# LLM gateway

class EmptyBatch(InputError):
    """Prompt batch has no descriptions."""
    pass


class OversizedBatch(InputError):
    """Prompt batch is larger than the configured batch size."""
    pass


class CacheMiss(InputError):
    """Replay mode needs a response that is not in the cache."""

    def __init__(self, message: str, missing_keys: Optional[Iterable[str]] = None):
        self.missing_keys: List[str] = list(missing_keys or [])
        if self.missing_keys:
            message = f"{message}: {', '.join(self.missing_keys)}"
        super().__init__(message)


class ProviderError(ProviderFailure):
    """Provider request failed after exhausting retries."""
    pass


class AuthError(ProviderFailure):
    """Credentials are missing or were rejected."""
    pass


class RateLimitError(ProviderError):
    """Provider signalled rate limiting (HTTP 429)."""
    pass


# Evaluation and analysis

class LengthMismatch(InputError):
    """Paired sequences have different lengths."""
    pass


class EmptyInput(InputError):
    """Operation needs at least one sample."""
    pass


class SingleClass(InputError):
    """Operation needs at least two distinct classes."""
    pass


class DegenerateTable(InputError):
    """Contingency table has a zero marginal or a single row/column."""
    pass


class CoverageMismatch(InputError):
    """Predictions do not cover the same CVE set as the ground truth."""
    pass


class EmptyText(InputError):
    """Text has no tokens."""
    pass


class ZeroVariance(InputError):
    """Correlation is undefined for a constant series."""
    pass


# Meta classification

class WrongModelCount(InputError):
    """Number of model predictions differs from the expected count."""
    pass


class TooFewPerClass(InputError):
    """A class has too few samples for a stratified split."""
    pass


class NonFiniteFeature(InputError):
    """Feature matrix contains NaN or infinite values."""
    pass


class DimensionMismatch(InputError):
    """Feature dimensionality differs from the one seen in training."""
    pass
