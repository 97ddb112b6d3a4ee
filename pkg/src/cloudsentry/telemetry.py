"""Telemetry data model: records, sliding windows, per-channel normalization.

Telemetry arrives as timestamped multi-channel metric samples with attached
log lines, one stream per provider. Detection operates on fixed-length
windows of consecutive samples, z-scored per channel with statistics fitted
on the training split only.

All operations here are pure functions over immutable inputs; window values
are materialized as fresh float64 arrays, never views into caller state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ChannelMismatchError, NonFiniteValueError

LABEL_NORMAL = "normal"
LABEL_ANOMALOUS = "anomalous"

DEFAULT_WINDOW_LEN = 10
DEFAULT_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class TelemetryRecord:
    """One timestamped multi-channel sample from a single provider/service.

    ``label`` is True for anomalous, False for normal, None for unlabeled;
    labels ride along from ingestion so windows can inherit them.
    """

    timestamp: int
    provider_id: str
    service_id: str
    metrics: tuple[float, ...]
    log_lines: tuple[str, ...] = ()
    label: bool | None = None


@dataclass(frozen=True)
class WindowTensor:
    """A fixed-length window of consecutive samples from one provider.

    ``values`` has shape (T, m), one row per time step. ``stride_origin``
    is the index of the first row within the source record sequence.
    """

    values: np.ndarray
    start_timestamp: int
    stride_origin: int
    label: str | None
    provider_id: str = "default"


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and floored standard deviation from the training split."""

    mean: np.ndarray
    std: np.ndarray
    channel_count: int


def validate_record(record: TelemetryRecord, expected_channels: int) -> TelemetryRecord:
    """Return ``record`` unchanged if its metrics are well-formed.

    Raises:
        ChannelMismatchError: metric count differs from ``expected_channels``.
        NonFiniteValueError: any metric is NaN or infinite.
    """
    if len(record.metrics) != expected_channels:
        raise ChannelMismatchError(
            f"record at ts={record.timestamp} has {len(record.metrics)} metrics, "
            f"expected {expected_channels}"
        )
    for value in record.metrics:
        if not math.isfinite(value):
            raise NonFiniteValueError(
                f"record at ts={record.timestamp} contains non-finite metric {value!r}"
            )
    return record


def build_windows(
    records: Sequence[TelemetryRecord],
    window_len: int = DEFAULT_WINDOW_LEN,
    stride: int = 1,
) -> list[WindowTensor]:
    """Slice a time-ordered record sequence into sliding windows.

    Windows start at indices 0, stride, 2*stride, ... and are emitted only
    when the full window fits; fewer records than ``window_len`` yields an
    empty list. A window is labeled anomalous iff any contained record is;
    it stays unlabeled when no contained record carries a label.
    """
    if window_len < 1 or stride < 1:
        raise ValueError("window_len and stride must be >= 1")
    n = len(records)
    if n < window_len:
        return []
    for i in range(1, n):
        if records[i].timestamp < records[i - 1].timestamp:
            raise ValueError("records must be sorted by timestamp")

    windows: list[WindowTensor] = []
    for start in range(0, n - window_len + 1, stride):
        chunk = records[start : start + window_len]
        values = np.array([r.metrics for r in chunk], dtype=np.float64)
        labels = [r.label for r in chunk]
        if all(lab is None for lab in labels):
            label = None
        elif any(lab is True for lab in labels):
            label = LABEL_ANOMALOUS
        else:
            label = LABEL_NORMAL
        windows.append(
            WindowTensor(
                values=values,
                start_timestamp=chunk[0].timestamp,
                stride_origin=start,
                label=label,
                provider_id=chunk[0].provider_id,
            )
        )
    return windows


def fit_stats(
    training_windows: Sequence[WindowTensor],
    std_floor: float = DEFAULT_STD_FLOOR,
) -> ChannelStats:
    """Fit per-channel mean/std over all rows of the training windows.

    Zero-variance channels get the ``std_floor`` instead of raising, so
    constant channels normalize to zero rather than blowing up.
    """
    if not training_windows:
        raise ValueError("at least one training window is required")
    stacked = np.vstack([w.values for w in training_windows])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.maximum(std, std_floor)
    return ChannelStats(mean=mean, std=std, channel_count=stacked.shape[1])


def normalize(window: WindowTensor, stats: ChannelStats) -> WindowTensor:
    """Z-score every channel of ``window`` against ``stats``."""
    if window.values.shape[1] != stats.channel_count:
        raise ChannelMismatchError(
            f"window has {window.values.shape[1]} channels, "
            f"stats expect {stats.channel_count}"
        )
    values = (window.values - stats.mean) / stats.std
    return replace(window, values=values)


def identity_stats(channel_count: int) -> ChannelStats:
    """Stats that leave values unchanged (mean 0, std 1)."""
    return ChannelStats(
        mean=np.zeros(channel_count),
        std=np.ones(channel_count),
        channel_count=channel_count,
    )
