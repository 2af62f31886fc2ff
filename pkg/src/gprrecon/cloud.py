"""Point clouds: registration of cross-sections, resampling, nearest-neighbour
metrics and ASCII PLY I/O.

A point cloud is a plain ``(n, 3)`` float64 array in metres.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .autodiff import Tensor
from .scene.truth import CrossSection

_TIE_CANDIDATES = 4
_TIE_MARGIN = 1e-9


def as_cloud(points, allow_empty: bool = False) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"point cloud must be (n, 3), got {arr.shape}")
    if not allow_empty and len(arr) == 0:
        raise ValueError("point cloud is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point cloud has non-finite coordinates")
    return arr


# --- registration -------------------------------------------------------------

def section_points(section: CrossSection) -> np.ndarray:
    """World points of a section's occupied cells: node ``(i, j)`` maps to
    ``pose + j * cell * direction`` laterally and ``i * cell`` below it."""
    i, j = np.nonzero(section.mask)
    px, py, pz = section.pose
    dx, dy = section.direction
    u = j * section.cell
    return np.stack([px + u * dx, py + u * dy, pz - i * section.cell], axis=1).astype(np.float64)


def register_cross_sections(sections: Iterable[CrossSection]) -> np.ndarray:
    """Union of all sections' occupied cells in the world frame."""
    chunks = [section_points(s) for s in sections]
    if not chunks or sum(len(c) for c in chunks) == 0:
        raise ValueError("no detections: every cross-section is empty")
    return np.concatenate(chunks, axis=0)


def resample(cloud, n: int, seed: int = 0) -> np.ndarray:
    """Exactly ``n`` points: a subset without replacement when the cloud is
    large enough, otherwise every point plus duplicates drawn with replacement."""
    cloud = as_cloud(cloud)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    if len(cloud) >= n:
        return cloud[np.sort(rng.choice(len(cloud), n, replace=False))]
    extra = rng.choice(len(cloud), n - len(cloud), replace=True)
    return np.concatenate([cloud, cloud[extra]], axis=0)


# --- nearest neighbours ----------------------------------------------------------

def _pair_distance(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    dx = a[..., 0] - b[..., 0]
    dy = a[..., 1] - b[..., 1]
    dz = a[..., 2] - b[..., 2]
    if metric == "sqeuclidean":
        return dx * dx + dy * dy + dz * dz
    if metric == "l1":
        return np.abs(dx) + np.abs(dy) + np.abs(dz)
    raise ValueError(f"unknown metric {metric!r}")


def nearest_neighbors(queries: np.ndarray, points: np.ndarray, metric: str = "sqeuclidean"
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Index and distance of each query's nearest point (kd-tree).

    Candidates from the tree are re-scored with the same arithmetic as
    :func:`nearest_neighbors_brute`, and ties go to the lowest index. Rows
    whose candidate list might be cut inside a tie are re-queried with a
    ball search covering every point at the minimum distance.
    """
    queries, points = as_cloud(queries), as_cloud(points)
    k = min(_TIE_CANDIDATES, len(points))
    p = 1 if metric == "l1" else 2
    tree = cKDTree(points)
    _, idx = tree.query(queries, k=k, p=p)
    idx = np.asarray(idx).reshape(len(queries), k)
    d = _pair_distance(queries[:, None, :], points[idx], metric)
    # lexicographic (distance, index) minimum
    order = np.lexsort((idx, d), axis=1)[:, 0]
    rows = np.arange(len(queries))
    best_i, best_d = idx[rows, order], d[rows, order]
    if k < len(points):
        crowded = np.nonzero(d.max(axis=1) <= best_d * (1 + _TIE_MARGIN) + _TIE_MARGIN)[0]
        for r in crowded:
            radius = best_d[r] if metric == "l1" else math.sqrt(best_d[r])
            cand = np.asarray(tree.query_ball_point(queries[r], radius * (1 + _TIE_MARGIN) + _TIE_MARGIN, p=p))
            cd = _pair_distance(queries[r][None, :], points[cand], metric)
            j = np.lexsort((cand, cd))[0]
            best_i[r], best_d[r] = cand[j], cd[j]
    return best_i, best_d


def nearest_neighbors_brute(queries: np.ndarray, points: np.ndarray, metric: str = "sqeuclidean",
                            chunk: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """O(n m) reference; ``argmin`` picks the lowest index on ties."""
    queries, points = as_cloud(queries), as_cloud(points)
    idx = np.empty(len(queries), dtype=np.int64)
    dist = np.empty(len(queries))
    for lo in range(0, len(queries), chunk):
        q = queries[lo:lo + chunk]
        d = _pair_distance(q[:, None, :], points[None, :, :], metric)
        j = np.argmin(d, axis=1)
        idx[lo:lo + chunk] = j
        dist[lo:lo + chunk] = d[np.arange(len(q)), j]
    return idx, dist


def _mean(values: np.ndarray) -> float:
    # exactly rounded sum: independent of point order
    return math.fsum(values.tolist()) / len(values)


def chamfer_distance(S, S_gt, squared: bool = True, brute: bool = False, return_grad: bool = True):
    """Symmetric mean nearest-neighbour distance and its gradient w.r.t. ``S``.

    ``squared=True`` uses squared Euclidean point distances, otherwise plain
    Euclidean. Returns ``(value, grad)`` or just ``value``.
    """
    S, S_gt = as_cloud(S), as_cloud(S_gt)
    nn = nearest_neighbors_brute if brute else nearest_neighbors
    fwd_idx, fwd_d = nn(S, S_gt)
    bwd_idx, bwd_d = nn(S_gt, S)
    if not squared:
        fwd_d, bwd_d = np.sqrt(fwd_d), np.sqrt(bwd_d)
    value = _mean(fwd_d) + _mean(bwd_d)
    if not return_grad:
        return value
    diff_f = S - S_gt[fwd_idx]          # d/dx of |x - y*|^2 = 2 (x - y*)
    diff_b = S[bwd_idx] - S_gt          # d/dx* of |y - x*|^2 = 2 (x* - y)
    if squared:
        gf = 2.0 * diff_f
        gb = 2.0 * diff_b
    else:
        gf = diff_f / np.where(fwd_d > 0, fwd_d, 1.0)[:, None]
        gb = diff_b / np.where(bwd_d > 0, bwd_d, 1.0)[:, None]
    grad = gf / len(S)
    np.add.at(grad, bwd_idx, gb / len(S_gt))
    return value, grad


def l1_nn_distance(S, S_gt, brute: bool = False) -> float:
    """Chamfer-style symmetric mean of L1 nearest-neighbour distances."""
    S, S_gt = as_cloud(S), as_cloud(S_gt)
    nn = nearest_neighbors_brute if brute else nearest_neighbors
    _, fwd = nn(S, S_gt, "l1")
    _, bwd = nn(S_gt, S, "l1")
    return _mean(fwd) + _mean(bwd)


def chamfer_loss(pred: Tensor, target: np.ndarray, squared: bool = True) -> Tensor:
    """Chamfer distance as a differentiable scalar of ``pred`` (n, 3)."""
    value, grad = chamfer_distance(pred.data, target, squared=squared)
    return Tensor._from_op(np.array(value), (pred,), lambda g: (float(g) * grad,), "chamfer")


# --- PLY ----------------------------------------------------------------------------

class PlyError(ValueError):
    pass


def write_ply(cloud, path) -> None:
    cloud = as_cloud(cloud, allow_empty=True)
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
             "property float x", "property float y", "property float z", "end_header"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in cloud.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "ply":
        raise PlyError(f"{path}:1: missing 'ply' magic line")
    n_vertex = None
    props: list[str] = []
    in_vertex = False
    lineno = 1
    for lineno in range(2, len(text) + 1):
        parts = text[lineno - 1].split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            if parts[1:2] != ["ascii"]:
                raise PlyError(f"{path}:{lineno}: only ascii PLY is supported")
        elif parts[0] == "element":
            in_vertex = len(parts) == 3 and parts[1] == "vertex"
            if in_vertex:
                try:
                    n_vertex = int(parts[2])
                except ValueError:
                    raise PlyError(f"{path}:{lineno}: bad vertex count {parts[2]!r}") from None
            elif n_vertex is None:
                raise PlyError(f"{path}:{lineno}: element before vertex is not supported")
        elif parts[0] == "property":
            if in_vertex:
                props.append(parts[-1])
        elif parts[0] == "end_header":
            break
        else:
            raise PlyError(f"{path}:{lineno}: unexpected header line {text[lineno - 1]!r}")
    else:
        raise PlyError(f"{path}: missing end_header")
    if n_vertex is None:
        raise PlyError(f"{path}: no vertex element")
    if props[:3] != ["x", "y", "z"]:
        raise PlyError(f"{path}: vertex properties must start with x y z, got {props}")
    body = lineno
    out = np.empty((n_vertex, 3))
    for row in range(n_vertex):
        ln = body + row + 1
        if ln > len(text):
            raise PlyError(f"{path}:{ln}: vertex row {row + 1} of {n_vertex} missing (file ends)")
        parts = text[ln - 1].split()
        if len(parts) < 3:
            raise PlyError(f"{path}:{ln}: vertex row {row + 1} has {len(parts)} values")
        try:
            out[row] = [float(v) for v in parts[:3]]
        except ValueError:
            raise PlyError(f"{path}:{ln}: vertex row {row + 1} is not numeric") from None
    extra = [t for t in text[body + n_vertex:] if t.strip()]
    if extra:
        raise PlyError(f"{path}:{body + n_vertex + 1}: {len(extra)} rows beyond the advertised {n_vertex} vertices")
    return out
