"""Synthetic (sparse, dense) training pairs built from random scenes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import register_cross_sections, resample
from .kinematics import SurveyPlan, plan_grid_survey
from .scene import (GridSpec, PipeScene, ground_truth_cross_section, ground_truth_dense_cloud, random_scene)
from .gprnet.model import N_INPUT, N_OUTPUT


def seed_for(seed: int, *labels: int) -> np.random.SeedSequence:
    """Independent stream per (run seed, counter...) pair."""
    return np.random.SeedSequence([int(seed), *(int(v) for v in labels)])


def rng_for(seed: int, *labels: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_for(seed, *labels)))


def int_seed(seed: int, *labels: int) -> int:
    return int(seed_for(seed, *labels).generate_state(1, dtype=np.uint32)[0])


@dataclass
class Sample:
    scene: PipeScene
    sparse: np.ndarray
    dense: np.ndarray


def survey_grid(scene: PipeScene, plan: SurveyPlan, width: int = 128, height: int = 128) -> GridSpec:
    along = plan.lines[0].length
    return GridSpec(height, width, along / width)


def sparse_from_truth(scene: PipeScene, plan: SurveyPlan, grid: GridSpec | None = None,
                      n: int = N_INPUT, seed: int = 0) -> np.ndarray:
    """Register the ground-truth cross-section of every scan line and resample to ``n`` points."""
    grid = survey_grid(scene, plan) if grid is None else grid
    sections = [ground_truth_cross_section(scene, line, grid) for line in plan.lines]
    return resample(register_cross_sections(sections), n, seed=seed)


def make_sample(scene: PipeScene, seed: int = 0, line_spacing: float = 0.2) -> Sample:
    plan = plan_grid_survey(scene.extents, line_spacing, scene.extents[0] / 255, "x")
    sparse = sparse_from_truth(scene, plan, seed=int_seed(seed, 1))
    dense = ground_truth_dense_cloud(scene, N_OUTPUT, seed=int_seed(seed, 2))
    return Sample(scene, sparse, dense)


def make_dataset(count: int, seed: int = 0, **scene_kwargs) -> list[Sample]:
    """``count`` random scenes with at least one detectable pipe each."""
    out = []
    i = 0
    while len(out) < count:
        scene = random_scene(rng_for(seed, 0, i), **scene_kwargs)
        i += 1
        if not scene.pipes:
            continue
        out.append(make_sample(scene, seed=int_seed(seed, 1, i)))
    return out
