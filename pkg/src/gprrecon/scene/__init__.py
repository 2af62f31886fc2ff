"""Parametric pipe scenes, B-scan synthesis and ground truth."""
from .geometry import Pipe, PipeScene, reflectivity
from .forward import (BScan, C_M_PER_NS, wave_velocity, eps_for_velocity, two_way_travel_time, ricker,
                      synthesize_bscan, first_arrival_times, nearest_surface_ranges)
from .truth import (GridSpec, CrossSection, ground_truth_cross_section, ground_truth_dense_cloud,
                    add_gaussian_noise, grid_points, scan_frame)
from .io import (FormatError, format_scene, parse_scene, read_scene, write_scene, read_bscan, write_bscan)
from .generate import demo_scene, random_scene, perpendicular_pipe_scene

__all__ = [
    "Pipe", "PipeScene", "reflectivity", "BScan", "C_M_PER_NS", "wave_velocity", "eps_for_velocity",
    "two_way_travel_time", "ricker", "synthesize_bscan", "first_arrival_times", "nearest_surface_ranges",
    "GridSpec", "CrossSection", "ground_truth_cross_section", "ground_truth_dense_cloud",
    "add_gaussian_noise", "grid_points", "scan_frame", "FormatError", "format_scene", "parse_scene",
    "read_scene", "write_scene", "read_bscan", "write_bscan", "demo_scene", "random_scene",
    "perpendicular_pipe_scene",
]
