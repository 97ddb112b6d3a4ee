"""Central finite-difference gradient checking.

The relative error per coordinate is |analytic - numeric| divided by
max(|analytic|, |numeric|, 1e-4). The floor keeps structurally-zero
gradients from dividing by zero; it is set at 1e-4 because the central
difference itself carries cancellation noise of roughly eps*|f|/step
(~1e-10 for unit-scale functions at the default step), so absolute
disagreements below ~1e-8 are not resolvable and must not fail the check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class FiniteDifferenceReport:
    max_rel_error: float
    worst_index: int
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_difference_check(
    f: Callable[[np.ndarray], float],
    point: np.ndarray,
    analytic_grad: np.ndarray,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> FiniteDifferenceReport:
    """Compare an analytic gradient of a scalar map against central differences.

    ``f`` must be pure; it is called twice per coordinate of ``point``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if point.shape != analytic.shape:
        raise ValueError("point and analytic gradient must have equal shapes")

    flat = point.ravel().copy()
    analytic_flat = analytic.ravel()
    max_rel = 0.0
    worst = -1
    for idx in range(flat.size):
        original = flat[idx]
        flat[idx] = original + step
        f_plus = f(flat.reshape(point.shape))
        flat[idx] = original - step
        f_minus = f(flat.reshape(point.shape))
        flat[idx] = original
        numeric = (f_plus - f_minus) / (2.0 * step)
        denom = max(abs(analytic_flat[idx]), abs(numeric), 1e-4)
        rel = abs(analytic_flat[idx] - numeric) / denom
        if rel > max_rel:
            max_rel = rel
            worst = idx
    return FiniteDifferenceReport(
        max_rel_error=max_rel, worst_index=worst, checked=flat.size, tolerance=tolerance
    )
