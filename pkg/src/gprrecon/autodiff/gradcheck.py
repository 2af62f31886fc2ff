"""Central finite differences, used to audit analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np


def numerical_gradient(f: Callable[[], float], x: np.ndarray, step: float = 1e-5,
                       indices=None) -> np.ndarray:
    """d f / d x by central differences, perturbing ``x`` in place.

    ``f`` takes no arguments and must read ``x``. When ``indices`` (flat
    positions) is given only those entries are estimated; the rest stay 0.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    todo = range(flat.size) if indices is None else indices
    for i in todo:
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max|a - n| / max(max|a|, max|n|)``, i.e. error relative to the
    gradient's own scale (0 when both are identically zero)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - n)) / scale)



def smooth_indices(f: Callable[[], float], x: np.ndarray, candidates, count: int, step: float = 1e-5,
                   tol: float = 1e-6) -> list[int]:
    """First ``count`` flat positions of ``x`` where ``f`` looks smooth at scale ``step``.

    Central differences at ``step`` and ``step / 4`` agree to O(step^2) on a
    smooth function. A ReLU kink or a nearest-neighbour switch within
    ``step`` breaks that, and such positions are skipped.
    """
    out = []
    for i in candidates:
        a = numerical_gradient(f, x, step, [i]).reshape(-1)[i]
        b = numerical_gradient(f, x, step / 4, [i]).reshape(-1)[i]
        if abs(a - b) <= tol * max(abs(a), abs(b), 1e-12):
            out.append(int(i))
            if len(out) == count:
                break
    return out
