"""Buried-pipe scene description.

World frame: x, y span the slab surface from the origin; z is up, so buried
points have ``z <= 0`` and depth is ``-z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# reflection strength per material tag (unitless, relative)
REFLECTIVITY = {
    "metal": 1.0,
    "rebar": 1.0,
    "steel": 1.0,
    "utility": 0.8,
    "pvc": 0.5,
}
DEFAULT_REFLECTIVITY = 0.7


def reflectivity(material: str) -> float:
    return REFLECTIVITY.get(material.lower(), DEFAULT_REFLECTIVITY)


@dataclass(frozen=True)
class Pipe:
    start: tuple[float, float, float]
    end: tuple[float, float, float]
    radius: float
    material: str = "metal"

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "end", tuple(float(v) for v in self.end))
        if not self.radius > 0:
            raise ValueError(f"pipe radius must be positive, got {self.radius}")
        if self.length == 0:
            raise ValueError("pipe axis has zero length")

    @property
    def axis(self) -> np.ndarray:
        a = np.subtract(self.end, self.start)
        return a / np.linalg.norm(a)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    @property
    def lateral_area(self) -> float:
        return 2.0 * math.pi * self.radius * self.length

    def distance_to_axis(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from ``(..., 3)`` points to the axis segment."""
        p = np.asarray(points, dtype=np.float64)
        a = np.asarray(self.start)
        ab = np.subtract(self.end, self.start)
        s = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
        closest = a + s[..., None] * ab
        return np.linalg.norm(p - closest, axis=-1)


@dataclass
class PipeScene:
    extents: tuple[float, float, float]
    eps_r: float
    pipes: list[Pipe] = field(default_factory=list)

    def __post_init__(self):
        self.extents = tuple(float(v) for v in self.extents)
        self.pipes = list(self.pipes)
        if len(self.extents) != 3 or min(self.extents) <= 0:
            raise ValueError(f"slab extents must be three positive lengths, got {self.extents}")
        if not self.eps_r >= 1:
            raise ValueError(f"relative permittivity must be >= 1, got {self.eps_r}")
        for i, pipe in enumerate(self.pipes):
            self._check_inside(i, pipe)

    def _check_inside(self, i: int, pipe: Pipe, tol: float = 1e-9) -> None:
        sx, sy, sz = self.extents
        for p in (pipe.start, pipe.end):
            x, y, z = p
            if not (-tol <= x <= sx + tol and -tol <= y <= sy + tol):
                raise ValueError(f"pipe {i}: endpoint {p} outside slab footprint {sx} x {sy}")
            if not (-sz - tol <= z - pipe.radius and z + pipe.radius <= tol):
                raise ValueError(f"pipe {i}: endpoint {p} with radius {pipe.radius} "
                                 f"not inside slab depth [0, {sz}]")

    @property
    def velocity(self) -> float:
        from .forward import wave_velocity
        return wave_velocity(self.eps_r)

    def distance_to_axes(self, points: np.ndarray) -> np.ndarray:
        """``(n_pipes, ...)`` distances from points to every pipe axis."""
        return np.stack([p.distance_to_axis(points) for p in self.pipes])

    def with_pipes(self, pipes) -> "PipeScene":
        return PipeScene(self.extents, self.eps_r, list(pipes))
