"""Array validation at kernel boundaries."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError


def as_matrix(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite entries")
    return arr


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite entries")
    return arr


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ShapeMismatchError(message)
