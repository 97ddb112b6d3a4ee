"""Evaluation primitives: classification metrics, detection latency against
declared fault intervals, and the static k-sigma threshold baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError
from .telemetry import ChannelStats

DEFAULT_GRACE_STEPS = 50
DEFAULT_SIGMA_K = 3.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    anomalous: ClassMetrics
    normal: ClassMetrics


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def metrics(predicted: list[bool], truth: list[bool]) -> MetricsReport:
    """Precision/recall/F1 with zero-denominator cases mapped to 0.

    The positive class is "anomalous"; the report also carries the metrics
    of the complementary class.
    """
    if len(predicted) != len(truth):
        raise LengthMismatchError(
            f"predicted ({len(predicted)}) and truth ({len(truth)}) lengths differ"
        )
    tp = fp = tn = fn = 0
    for p, t in zip(predicted, truth):
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    return MetricsReport(
        counts=ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn),
        anomalous=_prf(tp, fp, fn),
        normal=_prf(tn, fn, fp),
    )


@dataclass(frozen=True)
class LatencyReport:
    """Per-fault detection latency in steps; None marks a missed fault."""

    per_fault: tuple[int | None, ...]
    missed: int
    false_alarms: int

    @property
    def detected(self) -> tuple[int, ...]:
        return tuple(v for v in self.per_fault if v is not None)

    @property
    def mean_steps(self) -> float | None:
        detected = self.detected
        return float(np.mean(detected)) if detected else None

    @property
    def median_steps(self) -> float | None:
        detected = self.detected
        return float(np.median(detected)) if detected else None


def detection_latency(
    alert_steps: list[int],
    fault_intervals: list[tuple[int, int]],
    grace: int = DEFAULT_GRACE_STEPS,
) -> LatencyReport:
    """Latency of the first alert within each fault's grace window.

    ``fault_intervals`` are (start_step, length) pairs, disjoint and ordered.
    A fault's grace window is [start, start + grace]; alerts landing in no
    grace window count as false alarms.
    """
    starts = [start for start, _ in fault_intervals]
    if starts != sorted(starts):
        raise ValueError("fault intervals must be ordered by start step")
    alert_steps = sorted(alert_steps)
    per_fault: list[int | None] = []
    for start, _length in fault_intervals:
        latency = None
        for step in alert_steps:
            if start <= step <= start + grace:
                latency = step - start
                break
            if step > start + grace:
                break
        per_fault.append(latency)
    covered = [
        any(start <= step <= start + grace for start, _ in fault_intervals)
        for step in alert_steps
    ]
    false_alarms = sum(1 for c in covered if not c)
    return LatencyReport(
        per_fault=tuple(per_fault),
        missed=sum(1 for v in per_fault if v is None),
        false_alarms=false_alarms,
    )


def intervals_from_flags(flags: list[bool]) -> list[tuple[int, int]]:
    """Maximal runs of true flags as (start, length) intervals."""
    intervals: list[tuple[int, int]] = []
    start = None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append((start, i - start))
            start = None
    if start is not None:
        intervals.append((start, len(flags) - start))
    return intervals


def threshold_baseline(
    values: np.ndarray, stats: ChannelStats, k: float = DEFAULT_SIGMA_K
) -> list[bool]:
    """Static threshold rule: flag a step iff any channel deviates >= k sigma
    from its training mean."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != stats.channel_count:
        raise LengthMismatchError("values must be (steps, channels) matching the stats")
    deviation = np.abs(values - stats.mean) / stats.std
    return [bool(row) for row in (deviation >= k).any(axis=1)]
