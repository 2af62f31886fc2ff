"""Kinematic B-scan synthesis.

Each pipe acts as a nearest-surface scatterer: for every trace the echo is a
Ricker wavelet centred on the two-way travel time to the closest point of the
pipe surface, scaled by the material reflectivity and 1/r spreading. Echoes
from different pipes add linearly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..kinematics import ScanLine, SurveyPose, drive_line
from .geometry import PipeScene, reflectivity

C_M_PER_NS = 0.299792458
MIN_RANGE = 0.01  # m, clamp for the 1/r spreading term


def wave_velocity(eps_r: float) -> float:
    """Propagation speed in m/ns."""
    if not eps_r >= 1:
        raise ValueError(f"relative permittivity must be >= 1, got {eps_r}")
    return C_M_PER_NS / math.sqrt(eps_r)


def eps_for_velocity(v: float) -> float:
    return (C_M_PER_NS / v) ** 2


def two_way_travel_time(antenna_x, scatterer, eps_r: float):
    """Two-way time (ns) from a surface antenna at ``antenna_x`` to a point
    scatterer at ``(x, depth)``; ``depth > 0``."""
    x, z = scatterer
    if np.any(np.asarray(z) <= 0):
        raise ValueError(f"scatterer depth must be positive, got {z}")
    v = wave_velocity(eps_r)
    return 2.0 * np.sqrt((np.asarray(antenna_x, dtype=np.float64) - x) ** 2 + np.asarray(z) ** 2) / v


def ricker(t, frequency_ghz: float = 1.5):
    """Ricker wavelet with peak 1 at ``t = 0`` (t in ns)."""
    a = (math.pi * frequency_ghz * np.asarray(t, dtype=np.float64)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


@dataclass
class BScan:
    """Radargram: ``amplitudes[t, k]`` is time sample t of trace k."""
    amplitudes: np.ndarray
    dt: float
    poses: list[SurveyPose]
    trace_spacing: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.amplitudes.ndim != 2 or min(self.amplitudes.shape) == 0:
            raise ValueError(f"B-scan needs a non-empty (T, K) grid, got {self.amplitudes.shape}")
        if len(self.poses) != self.amplitudes.shape[1]:
            raise ValueError(f"{self.amplitudes.shape[1]} traces but {len(self.poses)} poses")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_samples(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_traces(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return np.array([[p.x, p.y, p.z] for p in self.poses])

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]

    @property
    def direction(self) -> np.ndarray:
        """Unit xy direction from first to last trace (x-directed for one trace)."""
        pos = self.positions
        d = pos[-1, :2] - pos[0, :2]
        n = np.linalg.norm(d)
        return np.array([1.0, 0.0]) if n == 0 else d / n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


def default_dt(scene: PipeScene, n_samples: int, margin: float = 1.2) -> float:
    window = margin * 2.0 * scene.extents[2] / scene.velocity
    return window / n_samples


def _check_on_slab(scene: PipeScene, xy: np.ndarray, tol: float = 1e-6) -> None:
    sx, sy, _ = scene.extents
    off = (xy[:, 0] < -tol) | (xy[:, 0] > sx + tol) | (xy[:, 1] < -tol) | (xy[:, 1] > sy + tol)
    if np.any(off):
        k = int(np.argmax(off))
        raise ValueError(f"survey leaves the slab: trace {k} at {tuple(xy[k])} outside {sx} x {sy}")


def nearest_surface_ranges(scene: PipeScene, antennas: np.ndarray) -> np.ndarray:
    """``(n_pipes, K)`` distance from each antenna to each pipe surface."""
    if not scene.pipes:
        return np.zeros((0, len(antennas)))
    return np.stack([np.maximum(p.distance_to_axis(antennas) - p.radius, 0.0) for p in scene.pipes])


def synthesize_bscan(scene: PipeScene, line: ScanLine, n_samples: int = 256, dt: float | None = None,
                     frequency_ghz: float = 1.5, poses: Sequence[SurveyPose] | None = None) -> BScan:
    """Noise-free B-scan of ``scene`` along ``line``; deterministic."""
    if poses is None:
        poses = drive_line(line)
    poses = list(poses)
    antennas = np.array([[p.x, p.y, 0.0] for p in poses])
    _check_on_slab(scene, antennas[:, :2])
    if dt is None:
        dt = default_dt(scene, n_samples)
    v = scene.velocity
    t = np.arange(n_samples)[:, None] * dt
    out = np.zeros((n_samples, len(poses)))
    ranges = nearest_surface_ranges(scene, antennas)
    for pipe, r in zip(scene.pipes, ranges):
        arrival = 2.0 * r / v
        amp = reflectivity(pipe.material) / np.maximum(r, MIN_RANGE)
        out += amp[None, :] * ricker(t - arrival[None, :], frequency_ghz)
    meta = {"eps_r": scene.eps_r, "frequency_ghz": frequency_ghz}
    return BScan(out, float(dt), poses, float(line.trace_spacing), meta)


def first_arrival_times(scene: PipeScene, bscan: BScan) -> np.ndarray:
    """``(n_pipes, K)`` analytic echo times (ns) for each trace."""
    return 2.0 * nearest_surface_ranges(scene, bscan.positions * [1, 1, 0]) / scene.velocity
