"""Ground-truth cross-section masks and dense surface clouds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..kinematics import ScanLine, SurveyPose
from .geometry import PipeScene


@dataclass(frozen=True)
class GridSpec:
    """Vertical image grid below a scan line.

    Node ``(i, j)`` sits ``j * cell`` along the line from its start and
    ``i * cell`` below the surface.
    """
    height: int = 128
    width: int = 128
    cell: float = 2.0 / 128

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or not self.cell > 0:
            raise ValueError(f"invalid grid {self.height} x {self.width} @ {self.cell}")

    @classmethod
    def covering(cls, length: float, height: int = 128, width: int = 128) -> "GridSpec":
        """Grid whose ``width`` nodes span ``length`` metres."""
        return cls(height, width, length / width)

    def lateral(self) -> np.ndarray:
        return np.arange(self.width) * self.cell

    def depth(self) -> np.ndarray:
        return np.arange(self.height) * self.cell


@dataclass
class CrossSection:
    """Binary occupancy grid (depth rows x lateral columns) under one scan line."""
    mask: np.ndarray
    cell: float
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise ValueError(f"cross-section mask must be 2-d, got {m.shape}")
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("cross-section mask must contain only 0 and 1")
        self.mask = m.astype(np.uint8)
        self.pose = tuple(float(v) for v in self.pose)
        self.direction = tuple(float(v) for v in self.direction)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.mask.shape[0], self.mask.shape[1], self.cell)


def scan_frame(scan) -> tuple[np.ndarray, np.ndarray]:
    """Start point (3,) and unit xy direction (2,) of a scan line, B-scan or pose."""
    if isinstance(scan, ScanLine):
        return np.array([scan.start[0], scan.start[1], 0.0]), scan.direction
    if isinstance(scan, SurveyPose):
        return scan.position, np.array([1.0, 0.0])
    if hasattr(scan, "start") and hasattr(scan, "direction"):
        return np.asarray(scan.start, dtype=np.float64), np.asarray(scan.direction, dtype=np.float64)
    start, direction = scan
    return np.asarray(start, dtype=np.float64), np.asarray(direction, dtype=np.float64)


def grid_points(start: np.ndarray, direction: np.ndarray, grid: GridSpec) -> np.ndarray:
    """World coordinates ``(H, W, 3)`` of every grid node."""
    u = grid.lateral()
    w = grid.depth()
    pts = np.empty((grid.height, grid.width, 3))
    pts[..., 0] = start[0] + u[None, :] * direction[0]
    pts[..., 1] = start[1] + u[None, :] * direction[1]
    pts[..., 2] = start[2] - w[:, None]
    return pts


def ground_truth_cross_section(scene: PipeScene, scan, grid: GridSpec | None = None) -> CrossSection:
    """Mask of grid nodes inside any pipe (solid cylinder) in the scan plane."""
    grid = GridSpec() if grid is None else grid
    start, direction = scan_frame(scan)
    mask = np.zeros((grid.height, grid.width), dtype=np.uint8)
    if scene.pipes:
        pts = grid_points(start, direction, grid)
        for pipe in scene.pipes:
            mask |= (pipe.distance_to_axis(pts) <= pipe.radius).astype(np.uint8)
    return CrossSection(mask, grid.cell, tuple(start), tuple(direction))


def _orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def ground_truth_dense_cloud(scene: PipeScene, n: int = 8064, seed: int = 0) -> np.ndarray:
    """``(n, 3)`` points uniform by area over the pipes' lateral surfaces."""
    if not scene.pipes:
        raise ValueError("cannot sample a dense cloud from a scene without pipes")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    areas = np.array([p.lateral_area for p in scene.pipes])
    counts = rng.multinomial(n, areas / areas.sum())
    chunks = []
    for pipe, k in zip(scene.pipes, counts):
        if k == 0:
            continue
        axis = pipe.axis
        u, w = _orthonormal_frame(axis)
        s = rng.uniform(0.0, pipe.length, k)
        theta = rng.uniform(0.0, 2.0 * math.pi, k)
        ring = pipe.radius * (np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * w)
        chunks.append(np.asarray(pipe.start) + s[:, None] * axis + ring)
    return np.concatenate(chunks, axis=0)


def add_gaussian_noise(data, sigma: float, seed=0):
    """Copy of ``data`` (array, point cloud or :class:`BScan`) with i.i.d.
    N(0, sigma^2) added to every coordinate / amplitude."""
    if not sigma >= 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma}")
    from .forward import BScan
    if isinstance(data, BScan):
        return BScan(add_gaussian_noise(data.amplitudes, sigma, seed), data.dt, list(data.poses),
                     data.trace_spacing, dict(data.meta))
    arr = np.array(data, dtype=np.float64, copy=True)
    if sigma == 0:
        return arr
    return arr + np.random.default_rng(seed).normal(0.0, sigma, size=arr.shape)
