"""Point-cloud completion network and its training loop."""
from .model import GPRNet, GPRNetConfig, GLOBAL_DIM, N_INPUT, N_OUTPUT, N_SEEDS, PATCH, LOCAL_SIZES, folding_grid
from .train import (TrainConfig, TrainLog, EvalReport, split_dataset, train_gprnet, evaluate, noise_sweep,
                    mean_cd, NOISE_LEVELS, CD_SCALE, L1_SCALE)

__all__ = [
    "GPRNet", "GPRNetConfig", "GLOBAL_DIM", "N_INPUT", "N_OUTPUT", "N_SEEDS", "PATCH", "LOCAL_SIZES",
    "folding_grid", "TrainConfig", "TrainLog", "EvalReport", "split_dataset", "train_gprnet", "evaluate",
    "noise_sweep", "mean_cd", "NOISE_LEVELS", "CD_SCALE", "L1_SCALE",
]
