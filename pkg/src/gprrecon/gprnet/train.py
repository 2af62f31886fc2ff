"""Chamfer-distance training loop, evaluation and noise sweeps for GPRNet."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Adam, NumericalError, save_checkpoint
from ..cloud import as_cloud, chamfer_distance, chamfer_loss, l1_nn_distance
from ..scene.truth import add_gaussian_noise
from .model import GPRNet, GPRNetConfig

logger = logging.getLogger(__name__)

CD_SCALE = 1e3
L1_SCALE = 1e2
NOISE_LEVELS = (0.05, 0.1, 0.2, 0.5)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 5e-5
    lr_decay: float = 0.7
    lr_decay_steps: int = 50_000
    seed: int = 0
    n_val: int = 100
    n_test: int = 150
    max_steps: int | None = None
    checkpoint_path: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch size and learning rate must be positive")
        if self.n_val < 0 or self.n_test < 0:
            raise ValueError("split sizes must be non-negative")


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)       # one per epoch
    step_losses: list[float] = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["step", "train_cd", "val_cd", "lr"])
            w.writeheader()
            for row in self.rows:
                w.writerow({k: ("" if row[k] is None else repr(row[k])) for k in w.fieldnames})


def split_dataset(n: int, n_val: int = 100, n_test: int = 150, seed: int = 0):
    """Shuffled index split into (train, val, test); train gets the remainder."""
    if n_val + n_test > n:
        raise ValueError(f"cannot take {n_val} validation + {n_test} test samples from {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[n_val + n_test:], perm[:n_val], perm[n_val:n_val + n_test]


def _check_pairs(dataset: Sequence, n_input: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    out = []
    for i, (sparse, dense) in enumerate(dataset):
        sparse, dense = as_cloud(sparse), as_cloud(dense)
        if sparse.shape[0] != n_input:
            raise ValueError(f"sample {i}: sparse cloud has {sparse.shape[0]} points, expected {n_input}")
        out.append((sparse, dense))
    return out


def mean_cd(model: GPRNet, pairs) -> float:
    return float(np.mean([chamfer_distance(model.predict(s), d, return_grad=False) for s, d in pairs]))


def train_gprnet(train_set: Sequence, config: TrainConfig | None = None, val_set: Sequence = (),
                 model: GPRNet | None = None, model_config: GPRNetConfig | None = None
                 ) -> tuple[GPRNet, TrainLog]:
    """Minimise the squared Chamfer distance of ``decode(encode(sparse))`` to the dense truth.

    Mini-batch gradients are averaged over the batch. When a validation set
    is given the best-validation weights are restored at the end (and are
    what the checkpoint holds).
    """
    config = TrainConfig() if config is None else config
    model = GPRNet(model_config, seed=config.seed) if model is None else model
    pairs = _check_pairs(train_set, model.config.n_input)
    val_pairs = _check_pairs(val_set, model.config.n_input) if len(val_set) else []
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.named_parameters(), learning_rate=config.learning_rate,
               decay_factor=config.lr_decay, decay_interval=config.lr_decay_steps)
    log = TrainLog()
    best_state = None
    last_good = model.state_dict()

    def abort(msg: str):
        model.load_state_dict(last_good)
        if config.checkpoint_path:
            save_checkpoint(last_good, config.checkpoint_path)
        raise NumericalError(msg)

    done = False
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            opt.zero_grad()
            total = 0.0
            for idx in batch:
                sparse, dense = pairs[idx]
                pred = model(sparse)
                if not np.all(np.isfinite(pred.data)):
                    abort(f"non-finite prediction at step {opt.state.step + 1}")
                loss = chamfer_loss(pred, dense)
                value = float(loss.data)
                if not np.isfinite(value):
                    abort(f"non-finite Chamfer loss at step {opt.state.step + 1}")
                loss.backward(np.array(1.0 / len(batch)))
                total += value
            lr = opt.lr
            try:
                opt.step()
            except NumericalError as exc:
                abort(str(exc))
            last_good = model.state_dict()
            log.step_losses.append(total / len(batch))
            epoch_losses.append(total / len(batch))
            if config.max_steps is not None and opt.state.step >= config.max_steps:
                done = True
                break
        val = mean_cd(model, val_pairs) if val_pairs else None
        log.rows.append({"step": opt.state.step, "train_cd": float(np.mean(epoch_losses)), "val_cd": val, "lr": lr})
        logger.info("epoch %d step %d train_cd %.6f val_cd %s", epoch + 1, opt.state.step,
                    log.rows[-1]["train_cd"], val)
        if val is not None and val < log.best_val:
            log.best_val, log.best_epoch = val, epoch + 1
            best_state = model.state_dict()
        if done:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    if config.checkpoint_path:
        save_checkpoint(model.state_dict(), config.checkpoint_path)
    if config.log_path:
        log.write_csv(config.log_path)
    return model, log


@dataclass
class EvalReport:
    cd_x1e3: list[float]
    l1_x100: list[float]

    @property
    def mean_cd_x1e3(self) -> float:
        return float(np.mean(self.cd_x1e3))

    @property
    def mean_l1_x100(self) -> float:
        return float(np.mean(self.l1_x100))

    def as_dict(self) -> dict:
        return {"mean_cd_x1e3": self.mean_cd_x1e3, "mean_l1_x100": self.mean_l1_x100,
                "per_sample": [{"cd_x1e3": c, "l1_x100": l} for c, l in zip(self.cd_x1e3, self.l1_x100)]}


def _predictor(model) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, GPRNet):
        return model.predict
    if hasattr(model, "predict_one"):
        return model.predict_one
    if callable(model):
        return model
    raise TypeError(f"cannot evaluate {type(model).__name__}")


def evaluate(model, test_set: Sequence) -> EvalReport:
    """Per-sample squared CD x 1e3 and L1 NN distance x 100."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    predict = _predictor(model)
    cds, l1s = [], []
    for sparse, dense in test_set:
        pred = predict(as_cloud(sparse))
        cds.append(chamfer_distance(pred, dense, return_grad=False) * CD_SCALE)
        l1s.append(l1_nn_distance(pred, dense) * L1_SCALE)
    return EvalReport(cds, l1s)


def noise_sweep(model, test_set: Sequence, levels: Sequence[float] = NOISE_LEVELS, seed: int = 0
                ) -> list[dict]:
    """Evaluate with Gaussian noise of each standard deviation added to the sparse inputs.

    Sample ``i`` draws the same unit-normal field at every level (scaled by
    the level), so rows differ only by noise amplitude.
    """
    rows = []
    for sigma in levels:
        noisy = [(add_gaussian_noise(s, sigma, seed=np.random.SeedSequence([seed, i])), d)
                 for i, (s, d) in enumerate(test_set)]
        rep = evaluate(model, noisy)
        rows.append({"noise_std": float(sigma), "cd_x1e3": rep.mean_cd_x1e3, "l1_x100": rep.mean_l1_x100,
                     "n": len(test_set)})
    return rows
