"""Bayesian alert calibration and the early-warning decision rule.

Raw SVM scores are calibrated on validation data into class-conditional
histogram likelihoods; Bayes' rule then turns a score into a posterior
anomaly confidence

    p(anomalous | s) = p(s | anomalous) p(anomalous) / p(s)

with p(s) the prior-weighted mixture of the two class likelihoods. The
decision rule fires an alert once the posterior has been at or above the
confidence threshold for ``persistence`` consecutive windows, and keeps the
alert active until the posterior drops below the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import SingleClassDataError, SinkUnavailableError

DEFAULT_BINS = 20
DEFAULT_PSEUDO_COUNT = 1.0
DEFAULT_THRESHOLD = 0.9
DEFAULT_PERSISTENCE = 1


@dataclass(frozen=True)
class LikelihoodModel:
    """Binned class-conditional score likelihoods plus class priors.

    Histograms are smoothed with a pseudo-count so every bin has positive
    probability; scores outside the calibration range clamp to edge bins.
    """

    bin_edges: np.ndarray
    p_score_anomalous: np.ndarray
    p_score_normal: np.ndarray
    prior_anomalous: float
    prior_normal: float
    pseudo_count: float

    @property
    def bins(self) -> int:
        return self.p_score_anomalous.shape[0]


@dataclass(frozen=True)
class ScoredWindow:
    """Input to the decision rule: one scored window of one stream."""

    window_id: str
    timestamp: int
    score: float
    posterior: float


@dataclass(frozen=True)
class AlertDecision:
    """Outcome of the early-warning rule for one window."""

    window_id: str
    timestamp: int
    score: float
    posterior: float
    alert: bool
    consecutive_count: int


def calibrate(
    scores: np.ndarray,
    anomalous: np.ndarray,
    bins: int = DEFAULT_BINS,
    pseudo_count: float = DEFAULT_PSEUDO_COUNT,
) -> LikelihoodModel:
    """Fit histogram likelihoods and class priors from labeled scores."""
    scores = np.asarray(scores, dtype=np.float64)
    anomalous = np.asarray(anomalous, dtype=bool)
    if scores.shape != anomalous.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned vectors")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if pseudo_count <= 0:
        raise ValueError("pseudo_count must be positive")
    n_anom = int(anomalous.sum())
    n_norm = int((~anomalous).sum())
    if n_anom == 0 or n_norm == 0:
        raise SingleClassDataError("calibration needs scores from both classes")

    lo, hi = float(scores.min()), float(scores.max())
    if lo == hi:  # degenerate range: widen so edges are strictly increasing
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)

    counts_anom, _ = np.histogram(scores[anomalous], bins=edges)
    counts_norm, _ = np.histogram(scores[~anomalous], bins=edges)
    p_anom = (counts_anom + pseudo_count) / (n_anom + pseudo_count * bins)
    p_norm = (counts_norm + pseudo_count) / (n_norm + pseudo_count * bins)
    total = n_anom + n_norm
    return LikelihoodModel(
        bin_edges=edges,
        p_score_anomalous=p_anom,
        p_score_normal=p_norm,
        prior_anomalous=n_anom / total,
        prior_normal=n_norm / total,
        pseudo_count=pseudo_count,
    )


def bin_index(score: float, model: LikelihoodModel) -> int:
    """Histogram bin of a score, clamped to the calibration range."""
    idx = int(np.searchsorted(model.bin_edges, score, side="right")) - 1
    return min(max(idx, 0), model.bins - 1)


def posterior(score: float, model: LikelihoodModel) -> float:
    """Posterior anomaly confidence p(anomalous | score) by Bayes' rule."""
    idx = bin_index(score, model)
    like_anom = model.p_score_anomalous[idx] * model.prior_anomalous
    like_norm = model.p_score_normal[idx] * model.prior_normal
    return float(like_anom / (like_anom + like_norm))


def decide(
    stream: Iterable[ScoredWindow],
    threshold: float = DEFAULT_THRESHOLD,
    persistence: int = DEFAULT_PERSISTENCE,
) -> Iterator[AlertDecision]:
    """Apply the persistence rule to one stream of scored windows.

    Stateful per-stream reducer: use one invocation per monitored stream.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must be in (0, 1)")
    if persistence < 1:
        raise ValueError("persistence must be >= 1")
    consecutive = 0
    for item in stream:
        if item.posterior >= threshold:
            consecutive += 1
        else:
            consecutive = 0
        yield AlertDecision(
            window_id=item.window_id,
            timestamp=item.timestamp,
            score=item.score,
            posterior=item.posterior,
            alert=consecutive >= persistence,
            consecutive_count=consecutive,
        )


# --- alert emission -------------------------------------------------------------


def format_alert(decision: AlertDecision) -> str:
    """Canonical one-line JSON rendering of a decision."""
    return json.dumps(
        {
            "ts": decision.timestamp,
            "window_id": decision.window_id,
            "score": decision.score,
            "posterior": decision.posterior,
            "alert": decision.alert,
        },
        sort_keys=True,
    )


def parse_alert(line: str) -> AlertDecision:
    """Inverse of format_alert (consecutive_count is not serialized)."""
    obj = json.loads(line)
    return AlertDecision(
        window_id=obj["window_id"],
        timestamp=obj["ts"],
        score=obj["score"],
        posterior=obj["posterior"],
        alert=obj["alert"],
        consecutive_count=0,
    )


class AlertWriter:
    """Append-only alert sink: a JSONL file, standard output, or both.

    Non-alert decisions are written only in verbose mode.
    """

    def __init__(self, path=None, stdout: bool = False, verbose: bool = False):
        self.path = path
        self.stdout = stdout
        self.verbose = verbose
        self._fh = None
        if path is not None:
            try:
                self._fh = open(path, "a", encoding="utf-8")
            except OSError as exc:
                raise SinkUnavailableError(f"cannot open alert sink {path}: {exc}") from exc

    def write(self, decision: AlertDecision) -> bool:
        """Emit one decision; returns True if a line was written."""
        if not decision.alert and not self.verbose:
            return False
        line = format_alert(decision)
        if self._fh is not None:
            try:
                self._fh.write(line + "\n")
            except OSError as exc:
                raise SinkUnavailableError(f"alert sink write failed: {exc}") from exc
        if self.stdout:
            print(line)
        return True

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "AlertWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
