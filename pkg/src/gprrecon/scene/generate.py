"""Scene generators: the two-pipe demo slab and random training scenes."""
from __future__ import annotations

import numpy as np

from .geometry import Pipe, PipeScene

DEMO_EXTENTS = (2.0, 2.0, 0.5)
DEMO_EPS_R = 6.25  # v ~= 0.12 m/ns, typical of dry concrete


def demo_scene() -> PipeScene:
    """2 m x 2 m x 0.5 m slab with one pipe along y and one oblique pipe.

    Both cross every x-directed scan line.
    """
    return PipeScene(DEMO_EXTENTS, DEMO_EPS_R, [
        Pipe((0.6, 0.0, -0.20), (0.6, 2.0, -0.20), 0.05, "metal"),
        Pipe((1.25, 0.0, -0.30), (1.55, 2.0, -0.30), 0.04, "metal"),
    ])


def random_scene(rng: np.random.Generator, extents=DEMO_EXTENTS, eps_r: float | None = None,
                 n_pipes: int | None = None, radius_range=(0.02, 0.08), max_skew: float = 0.3,
                 min_gap: float = 0.1) -> PipeScene:
    """Pipes running the full slab length in y, each skewed in x by up to
    ``max_skew`` m end to end, with non-overlapping footprints."""
    sx, sy, sz = extents
    if eps_r is None:
        eps_r = float(rng.uniform(4.0, 9.0))
    if n_pipes is None:
        n_pipes = int(rng.integers(1, 4))
    pipes: list[Pipe] = []
    for _ in range(200):
        if len(pipes) == n_pipes:
            break
        r = float(rng.uniform(*radius_range))
        depth = float(rng.uniform(r + 0.08, sz - r - 0.02))
        skew = float(rng.uniform(-max_skew, max_skew))
        x0 = float(rng.uniform(r + 0.1, sx - r - 0.1))
        x1 = x0 + skew
        if not (r + 0.1 <= x1 <= sx - r - 0.1):
            continue
        cand = Pipe((x0, 0.0, -depth), (x1, sy, -depth), r, str(rng.choice(["metal", "pvc", "utility"])))
        if all(_clearance(cand, p) > min_gap for p in pipes):
            pipes.append(cand)
    return PipeScene(extents, eps_r, pipes)


def _clearance(a: Pipe, b: Pipe) -> float:
    # closest approach in x at the two slab edges, minus radii
    dx = min(abs(a.start[0] - b.start[0]), abs(a.end[0] - b.end[0]))
    crossing = (a.start[0] - b.start[0]) * (a.end[0] - b.end[0]) <= 0
    return (0.0 if crossing else dx) - a.radius - b.radius


def perpendicular_pipe_scene(rng: np.random.Generator, extents=DEMO_EXTENTS, radius: float | None = None,
                             eps_r: float | None = None) -> PipeScene:
    """Single pipe along y (perpendicular to x-directed scan lines)."""
    sx, sy, sz = extents
    r = float(rng.uniform(0.01, 0.06)) if radius is None else radius
    eps_r = float(rng.uniform(4.0, 9.0)) if eps_r is None else eps_r
    x = float(rng.uniform(0.2 * sx, 0.8 * sx))
    depth = float(rng.uniform(r + 0.08, sz - r - 0.05))
    return PipeScene(extents, eps_r, [Pipe((x, 0.0, -depth), (x, sy, -depth), r, "metal")])
