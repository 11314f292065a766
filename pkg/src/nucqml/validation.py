"""Input validation shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

N_PHASES = 4


class StratificationError(ValueError):
    """A class present in the data has no training examples."""


def check_param_points(X) -> np.ndarray:
    """``(n, 3)`` array of ``(chi, sigma, lambda)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 columns (chi, sigma, lambda), got {X.shape[1]}")
    return X


def check_series(X, n_in: int | None = None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=False)
    if X.ndim == 1:
        X = X[None, :]
    if n_in is not None and X.shape[1] != n_in:
        raise ValueError(f"series length {X.shape[1]} != network input width {n_in}")
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integers in [0, 4)")
        y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= N_PHASES):
        raise ValueError("labels must lie in [0, 4)")
    return y.astype(np.int64)


def check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value
