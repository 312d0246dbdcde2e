"""Input validation helpers for the array-facing estimator API."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVectorError, DimensionError


def check_matrix(X, name: str = "X", dim: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 2-d array of shape (n_samples, n_features)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-d array, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"{name} has {X.shape[1]} features, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise DegenerateVectorError(f"{name} contains NaN or infinite values")
    return X


def check_matching_labels(X: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionError(
            f"y has shape {y.shape}, expected ({X.shape[0]},) to match X"
        )
    return y
