"""Exception taxonomy shared across the package."""

from __future__ import annotations


class CloudSentryError(Exception):
    """Base class for all package-specific errors."""


# --- telemetry ------------------------------------------------------------


class ChannelMismatchError(CloudSentryError):
    """Record metric count does not match the configured channel count."""


class NonFiniteValueError(CloudSentryError):
    """A metric value is NaN or infinite."""


# --- ingest ---------------------------------------------------------------


class SchemaError(CloudSentryError):
    """Input file is missing a required column or field."""


class ParseError(CloudSentryError):
    """A row or line could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InvalidScenarioError(CloudSentryError):
    """Synthetic scenario violates its own constraints."""


# --- logsem ---------------------------------------------------------------


class ServiceUnavailableError(CloudSentryError):
    """Embedding service failed after exhausting retries, or returned 4xx."""


class ServiceTimeoutError(CloudSentryError):
    """Embedding service timed out on every attempt."""


class DimensionMismatchError(CloudSentryError):
    """Embedding dimension differs from the configured dimension."""


# --- numeric kernels ------------------------------------------------------


class ShapeMismatchError(CloudSentryError):
    """Tensor shapes are inconsistent with the operation's contract."""


# --- detector -------------------------------------------------------------


class InvalidLabelError(CloudSentryError):
    """Class label outside {-1, +1}."""


class EmptyBatchError(CloudSentryError):
    """An operation requiring at least one sample received none."""


class SingleClassDataError(CloudSentryError):
    """Training or calibration data contains only one class."""


class NonFiniteLossError(CloudSentryError):
    """Training objective became NaN or infinite."""


# --- evaluation / checkpoint ----------------------------------------------


class LengthMismatchError(CloudSentryError):
    """Paired sequences have different lengths."""


class UnknownVersionError(CloudSentryError):
    """Checkpoint format version is not recognized."""


class CorruptCheckpointError(CloudSentryError):
    """Checkpoint file is malformed or internally inconsistent."""


class CheckpointIOError(CloudSentryError):
    """Checkpoint file could not be read or written."""


class SinkUnavailableError(CloudSentryError):
    """Alert sink could not be written."""
