"""Input validation helpers for estimator-style classes."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float array, rejecting NaN and infinities."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return arr


def as_float_vector(y, name: str = "y") -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return arr


def check_matching_lengths(X: np.ndarray, y: np.ndarray) -> None:
    if X.shape[0] != y.shape[0]:
        raise ValidationError(
            f"X and y disagree on sample count: {X.shape[0]} vs {y.shape[0]}"
        )


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise ValidationError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
