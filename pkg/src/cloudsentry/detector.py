"""Soft-margin SVM classification head trained by stochastic subgradient
descent, with an optional RBF realization via random Fourier features.

Convention: label +1 is normal, -1 is anomalous; alerts key off negative
decision scores. The objective is the regularized hinge sum

    0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i * (w . z_i + b))

and one SGD step uses the batch subgradient

    grad_w = w + C * sum_{violated} (-y_i * z_i)
    grad_b =     C * sum_{violated} (-y_i)

where a margin of exactly 1 counts as satisfied.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptyBatchError,
    InvalidLabelError,
    NonFiniteLossError,
    ShapeMismatchError,
    SingleClassDataError,
)

logger = logging.getLogger(__name__)

LABEL_NORMAL_SIGN = 1
LABEL_ANOMALOUS_SIGN = -1


@dataclass(frozen=True)
class SvmParams:
    """Weight vector, bias, and the training hyperparameters they were fit with."""

    w: np.ndarray
    b: float
    c: float = 1.0
    learning_rate: float = 0.01


@dataclass(frozen=True)
class FeatureScaler:
    """Standardization of classifier inputs against training statistics.

    Each dimension is centered and divided by its training std times
    sqrt(dim), so a typical feature vector has roughly unit norm. Pooled
    extractor descriptors have data-dependent scale, and the batch-sum
    subgradient steps are only stable at the default learning rate when
    feature norms are O(1).
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std

    def backward(self, grad_scaled: np.ndarray) -> np.ndarray:
        return grad_scaled / self.std


def fit_feature_scaler(features: np.ndarray, std_floor: float = 1e-6) -> FeatureScaler:
    """Fit a standardizer on training features; zero-variance dims get the floor."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ShapeMismatchError("scaler needs a nonempty (n, dim) feature matrix")
    per_dim = np.maximum(features.std(axis=0), std_floor)
    return FeatureScaler(
        mean=features.mean(axis=0),
        std=per_dim * math.sqrt(features.shape[1]),
    )


@dataclass(frozen=True)
class RffMap:
    """Random Fourier feature map approximating the RBF kernel
    exp(-gamma * ||x - y||^2); frequencies are N(0, 2*gamma I) rows."""

    omega: np.ndarray
    phase: np.ndarray
    gamma: float

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def input_dim(self) -> int:
        return self.omega.shape[1]


@dataclass(frozen=True)
class TrainReport:
    """Objective trace of one training run."""

    objective_per_epoch: tuple[float, ...]
    final_objective: float
    epochs_run: int
    seed: int


@dataclass(frozen=True)
class SvmTrainConfig:
    c: float = 1.0
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    use_rff: bool = False
    rff_dim: int = 1024
    rff_gamma: float | None = None  # None -> 1 / feature dim


def decision(z: np.ndarray, params: SvmParams) -> float:
    """Decision function w . z + b."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != params.w.shape:
        raise ShapeMismatchError(f"feature dim {z.shape} != weight dim {params.w.shape}")
    return float(params.w @ z + params.b)


def hinge(y: int, f: float) -> float:
    """Hinge loss max(0, 1 - y*f) for y in {-1, +1}."""
    if y not in (-1, 1):
        raise InvalidLabelError(f"label must be -1 or +1, got {y!r}")
    return max(0.0, 1.0 - y * f)


def objective(features: np.ndarray, labels: np.ndarray, params: SvmParams) -> float:
    """Regularized hinge objective over a batch."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ShapeMismatchError("features must be (n, dim)")
    if features.shape[0] == 0:
        raise EmptyBatchError("objective needs at least one sample")
    if features.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("features and labels must align")
    if not np.all(np.isin(labels, (-1, 1))):
        raise InvalidLabelError("labels must be -1 or +1")
    scores = features @ params.w + params.b
    hinges = np.maximum(0.0, 1.0 - labels * scores)
    return float(0.5 * params.w @ params.w + params.c * hinges.sum())


def svm_gradients(
    features: np.ndarray, labels: np.ndarray, params: SvmParams
) -> tuple[np.ndarray, float, np.ndarray]:
    """Batch subgradient of the objective; returns (grad_w, grad_b, violated mask)."""
    scores = features @ params.w + params.b
    violated = labels * scores < 1.0
    grad_w = params.w + params.c * -(labels[violated, None] * features[violated]).sum(axis=0)
    grad_b = params.c * float(-labels[violated].sum())
    return grad_w, grad_b, violated


def sgd_step(features: np.ndarray, labels: np.ndarray, params: SvmParams) -> SvmParams:
    """One subgradient step at the params' learning rate; returns new params."""
    if params.learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    grad_w, grad_b, _ = svm_gradients(
        np.asarray(features, dtype=np.float64), np.asarray(labels), params
    )
    return replace(
        params,
        w=params.w - params.learning_rate * grad_w,
        b=params.b - params.learning_rate * grad_b,
    )


# --- random Fourier features ---------------------------------------------------


def build_rff_map(
    input_dim: int, rff_dim: int, gamma: float, rng: np.random.Generator
) -> RffMap:
    """Sample frequencies N(0, 2*gamma I) and phases U[0, 2pi)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    omega = rng.normal(0.0, math.sqrt(2.0 * gamma), size=(rff_dim, input_dim))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=rff_dim)
    return RffMap(omega=omega, phase=phase, gamma=gamma)


def rff_transform(z: np.ndarray, rff: RffMap) -> np.ndarray:
    """sqrt(2/D) * cos(omega @ z + phase)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (rff.input_dim,):
        raise ShapeMismatchError(f"rff input dim {z.shape} != {rff.input_dim}")
    return np.sqrt(2.0 / rff.dim) * np.cos(rff.omega @ z + rff.phase)


def rff_backward(z: np.ndarray, rff: RffMap, grad_out: np.ndarray) -> np.ndarray:
    """Gradient of rff_transform w.r.t. its input, applied to ``grad_out``."""
    pre = rff.omega @ np.asarray(z, dtype=np.float64) + rff.phase
    scaled = -np.sqrt(2.0 / rff.dim) * np.sin(pre) * grad_out
    return scaled @ rff.omega


def transform_features(features: np.ndarray, rff: RffMap | None) -> np.ndarray:
    """Apply the RFF map row-wise, or pass through when no map is configured."""
    if rff is None:
        return np.asarray(features, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    return np.sqrt(2.0 / rff.dim) * np.cos(features @ rff.omega.T + rff.phase)


# --- training --------------------------------------------------------------------


def check_two_classes(labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise SingleClassDataError("training data must contain both classes")


def train_svm(
    features: np.ndarray,
    labels: np.ndarray,
    config: SvmTrainConfig,
    seed: int,
) -> tuple[SvmParams, RffMap | None, TrainReport]:
    """Shuffled minibatch subgradient training on fixed features.

    Deterministic for a fixed seed. The per-epoch objective is evaluated
    over the full training set after each epoch's updates.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("features must be (n, dim) aligned with labels")
    if not np.all(np.isin(labels, (-1, 1))):
        raise InvalidLabelError("labels must be -1 or +1")
    if config.learning_rate < 0:
        raise ValueError("learning rate must be nonnegative")
    check_two_classes(labels)

    rng = np.random.default_rng(seed)
    rff = None
    train_matrix = features
    if config.use_rff:
        gamma = config.rff_gamma if config.rff_gamma is not None else 1.0 / features.shape[1]
        rff = build_rff_map(features.shape[1], config.rff_dim, gamma, rng)
        train_matrix = transform_features(features, rff)

    # b starts at the all-normal margin so the first subgradients come from
    # the anomalous class alone rather than an imbalance-driven bias swing.
    params = SvmParams(
        w=np.zeros(train_matrix.shape[1]),
        b=1.0,
        c=config.c,
        learning_rate=config.learning_rate,
    )
    n = train_matrix.shape[0]
    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        if config.learning_rate > 0:
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                # Minibatch estimate of the full objective's subgradient: the
                # regularizer enters once per pass, so it is scaled by the
                # batch fraction; the batch covering the whole set reproduces
                # the plain sgd_step update exactly.
                batch_w, batch_b, _ = svm_gradients(train_matrix[idx], labels[idx], params)
                hinge_w = batch_w - params.w
                frac = len(idx) / n
                params = replace(
                    params,
                    w=params.w - config.learning_rate * (frac * params.w + hinge_w),
                    b=params.b - config.learning_rate * batch_b,
                )
        value = objective(train_matrix, labels, params)
        if not math.isfinite(value):
            raise NonFiniteLossError(f"objective diverged to {value!r}")
        trace.append(value)
    report = TrainReport(
        objective_per_epoch=tuple(trace),
        final_objective=trace[-1] if trace else objective(train_matrix, labels, params),
        epochs_run=config.epochs,
        seed=seed,
    )
    return params, rff, report
