"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .scene import BScan


def check_cloud(points, n_points: int | None = None, name: str = "cloud") -> np.ndarray:
    arr = check_array(points, dtype=np.float64, ensure_2d=True)
    if arr.shape[1] != 3:
        raise ValueError(f"{name} must have 3 columns, got {arr.shape[1]}")
    if n_points is not None and arr.shape[0] != n_points:
        raise ValueError(f"{name} must have {n_points} points, got {arr.shape[0]}")
    return arr


def check_cloud_batch(X, n_points: int | None = None, name: str = "X") -> list[np.ndarray]:
    """A 3-d array ``(n_samples, n_points, 3)`` or a sequence of ``(n, 3)`` clouds."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ValueError(f"{name} must be a batch of clouds; wrap a single cloud as [cloud]")
    clouds = [check_cloud(c, n_points, f"{name}[{i}]") for i, c in enumerate(X)]
    if not clouds:
        raise ValueError(f"{name} is empty")
    return clouds


def check_bscans(X, name: str = "X") -> list[BScan]:
    out = list(X)
    if not out:
        raise ValueError(f"{name} is empty")
    for i, b in enumerate(out):
        if not isinstance(b, BScan):
            raise TypeError(f"{name}[{i}] is {type(b).__name__}, expected BScan")
        check_array(b.amplitudes, dtype=np.float64)
    return out
