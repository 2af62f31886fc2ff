"""B-scan migration: back-projection and MigrationNet."""
from .backprojection import MigratedImage, backproject, backproject_sum, threshold_to_cross_section
from .net import MigrationNet, normalize_bscan, resample_image, POOL_FACTOR, BRANCH_POOLS
from .train import (MigrationTrainConfig, MigrationTrainResult, train_migrationnet, prepare_pair,
                    pixel_accuracy)
from .io import read_grid, write_grid, GRID_MAGIC

__all__ = [
    "MigratedImage", "backproject", "backproject_sum", "threshold_to_cross_section", "MigrationNet",
    "normalize_bscan", "resample_image", "POOL_FACTOR", "BRANCH_POOLS", "MigrationTrainConfig",
    "MigrationTrainResult", "train_migrationnet", "prepare_pair", "pixel_accuracy", "read_grid",
    "write_grid", "GRID_MAGIC",
]
