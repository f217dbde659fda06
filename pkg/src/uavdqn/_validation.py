"""Input validation helpers shared by the estimators and the world model."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_positions(X, name="positions", allow_empty=True):
    """Return ``X`` as a float ``(n, 2)`` array of finite planar coordinates."""
    if X is None:
        X = np.empty((0, 2))
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        if not allow_empty:
            raise ValueError(f"{name} must contain at least one point")
        return np.empty((0, 2))
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, input_name=name)
    if X.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {X.shape}")
    return X


def check_in_area(X, area, name="positions", atol=1e-9):
    width, height = area
    if X.size and (
        np.any(X[:, 0] < -atol) or np.any(X[:, 0] > width + atol)
        or np.any(X[:, 1] < -atol) or np.any(X[:, 1] > height + atol)
    ):
        raise ValueError(f"{name} fall outside the {width} x {height} area")
    return X


def check_trajectory(X, name="trajectory"):
    """Validate a UE trajectory array of shape ``(T, n_ues, 2)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have shape (T, n_ues, 2), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X
