"""End-to-end survey reconstruction: B-scans -> cross-sections -> sparse cloud -> dense cloud."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .cloud import as_cloud, register_cross_sections, resample
from .gprnet.model import N_INPUT, N_OUTPUT
from .kinematics import SurveyPlan
from .migration import MigrationNet, backproject, threshold_to_cross_section
from .migration.net import normalize_bscan
from .scene import BScan, CrossSection, GridSpec, PipeScene, synthesize_bscan

logger = logging.getLogger(__name__)


def survey_bscans(scene: PipeScene, plan: SurveyPlan, n_samples: int = 256) -> list[BScan]:
    """One synthetic B-scan per planned line, at the planned poses."""
    return [synthesize_bscan(scene, line, n_samples=n_samples, poses=poses)
            for line, poses in zip(plan.lines, plan.poses)]


def line_grid(bscan: BScan, height: int = 128, width: int = 128) -> GridSpec:
    """Square-cell grid whose width spans the scanned line."""
    length = float(np.linalg.norm(bscan.positions[-1, :2] - bscan.positions[0, :2]))
    return GridSpec.covering(length, height, width)


def migrate_bpa(bscan: BScan, eps_r: float, grid: GridSpec | None = None, mode: str = "coherent",
                threshold: float = 0.5) -> CrossSection:
    grid = line_grid(bscan) if grid is None else grid
    return threshold_to_cross_section(backproject(bscan, grid, eps_r, mode), threshold)


def migrate_net(bscan: BScan, model: MigrationNet, grid: GridSpec | None = None,
                threshold: float = 0.5) -> CrossSection:
    grid = line_grid(bscan) if grid is None else grid
    probs = model.predict_proba(normalize_bscan(bscan.amplitudes, (grid.height, grid.width)))
    start = bscan.start
    return CrossSection((probs >= threshold).astype(np.uint8), grid.cell, (float(start[0]), float(start[1]), 0.0),
                        tuple(bscan.direction))


def sparse_cloud(sections: Sequence[CrossSection], n: int = N_INPUT, seed: int = 0) -> np.ndarray:
    """Registered detections resampled to the network's input size."""
    return resample(register_cross_sections(sections), n, seed=seed)


def densify(sparse: np.ndarray, model=None, n: int = N_OUTPUT, seed: int = 0) -> np.ndarray:
    """Dense cloud from a completion model, or a plain resample when there is none."""
    if model is None:
        logger.info("no completion model: dense cloud is the sparse cloud resampled to %d points", n)
        return resample(sparse, n, seed=seed)
    return as_cloud(model.predict(sparse))


def fraction_near_surface(scene: PipeScene, cloud: np.ndarray, tolerance: float) -> float:
    """Share of points whose distance to some pipe axis is at most ``radius + tolerance``."""
    cloud = as_cloud(cloud)
    if not scene.pipes:
        return 0.0
    radii = np.array([p.radius for p in scene.pipes])[:, None]
    return float(np.mean(np.any(scene.distance_to_axes(cloud) <= radii + tolerance, axis=0)))
