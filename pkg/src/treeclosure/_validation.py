"""Input checks shared by the separator estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_points(X, n_features: int) -> np.ndarray:
    """2-D float array of finite points with ``n_features`` columns."""
    X = check_array(np.atleast_2d(np.asarray(X, dtype=float)), dtype=float)
    if X.shape[1] != n_features:
        raise ValueError(f"points have {X.shape[1]} entries, expected {n_features}")
    return X


def check_point(x, n_features: int) -> np.ndarray:
    return check_points(np.asarray(x, dtype=float).ravel(), n_features)[0]
