"""Back-projection migration and binarisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene.forward import BScan, wave_velocity
from ..scene.truth import CrossSection, GridSpec, grid_points


@dataclass
class MigratedImage:
    """Focused energy on a :class:`GridSpec` below a scan line."""
    values: np.ndarray
    cell: float
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"migrated image must be 2-d, got {self.values.shape}")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.values.shape[0], self.values.shape[1], self.cell)

    def argmax(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)


def _sample(trace: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``trace`` at fractional sample indices; 0 past the window."""
    n = trace.size
    valid = (idx >= 0) & (idx <= n - 1)
    lo = np.clip(np.floor(idx).astype(np.int64), 0, n - 1)
    hi = np.minimum(lo + 1, n - 1)
    frac = idx - lo
    out = trace[lo] * (1.0 - frac) + trace[hi] * frac
    return np.where(valid, out, 0.0)


def backproject_sum(bscan: BScan, grid: GridSpec, eps_r: float, rectify: bool = False) -> np.ndarray:
    """Raw back-projection sum over traces, accumulated in trace order.

    Each node gathers every trace's sample at its two-way travel time (linear
    interpolation; zero beyond the recorded window). With ``rectify`` the
    traces are replaced by ``|amplitude|`` first. Without it the result is a
    linear function of the B-scan.
    """
    v = wave_velocity(eps_r)
    start, direction = bscan.start, bscan.direction
    nodes = grid_points(np.array([start[0], start[1], 0.0]), direction, grid)
    amps = np.abs(bscan.amplitudes) if rectify else bscan.amplitudes
    image = np.zeros((grid.height, grid.width))
    for k, ant in enumerate(bscan.positions):
        r = np.sqrt((nodes[..., 0] - ant[0]) ** 2 + (nodes[..., 1] - ant[1]) ** 2 + nodes[..., 2] ** 2)
        image += _sample(amps[:, k], 2.0 * r / v / bscan.dt)
    return image


def backproject(bscan: BScan, grid: GridSpec, eps_r: float, mode: str = "abs") -> MigratedImage:
    """Migrate a B-scan onto ``grid`` below its scan line.

    ``mode="abs"`` sums ``|amplitude|`` over traces. ``mode="coherent"`` sums
    signed amplitudes and takes the magnitude of the total, which cancels the
    out-of-focus smear and gives much tighter blobs. Both are non-negative.
    """
    if mode == "abs":
        values = backproject_sum(bscan, grid, eps_r, rectify=True)
    elif mode == "coherent":
        values = np.abs(backproject_sum(bscan, grid, eps_r))
    else:
        raise ValueError(f"mode must be 'abs' or 'coherent', got {mode!r}")
    start = bscan.start
    return MigratedImage(values, grid.cell, (float(start[0]), float(start[1]), 0.0), tuple(bscan.direction))


def threshold_to_cross_section(image: MigratedImage, fraction: float = 0.5) -> CrossSection:
    """Mark nodes with value >= ``fraction`` x global max (all-zero image -> empty mask)."""
    if not 0 < fraction < 1:
        raise ValueError(f"threshold fraction must be in (0, 1), got {fraction}")
    peak = float(image.values.max())
    if peak <= 0:
        mask = np.zeros(image.values.shape, dtype=np.uint8)
    else:
        mask = (image.values >= fraction * peak).astype(np.uint8)
    return CrossSection(mask, image.cell, image.pose, image.direction)
