"""Per-pixel BCE training of :class:`MigrationNet`."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff import Adam, NumericalError, ops, save_checkpoint
from ..scene.forward import BScan
from ..scene.truth import CrossSection
from .net import MigrationNet, normalize_bscan

logger = logging.getLogger(__name__)


@dataclass
class MigrationTrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    checkpoint_path: str | None = None
    target_accuracy: float | None = None  # stop once every training pair reaches it


@dataclass
class MigrationTrainResult:
    epoch_losses: list[float] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)
    steps: int = 0


def prepare_pair(bscan, mask) -> tuple[np.ndarray, np.ndarray]:
    """Normalised network input and float target of matching shape."""
    target = mask.mask if isinstance(mask, CrossSection) else np.asarray(mask)
    amps = bscan.amplitudes if isinstance(bscan, BScan) else np.asarray(bscan)
    x = normalize_bscan(amps, target.shape)
    return x, target.astype(np.float64)


def pixel_accuracy(probs: np.ndarray, target: np.ndarray, threshold: float = 0.5) -> float:
    return float(np.mean((probs >= threshold) == (target >= 0.5)))


def train_migrationnet(model: MigrationNet, dataset: Sequence, config: MigrationTrainConfig | None = None
                       ) -> MigrationTrainResult:
    """One Adam step per (B-scan, mask) pair; returns loss curves.

    A non-finite loss restores the parameters from before the failing step,
    writes them to the configured checkpoint and raises :class:`NumericalError`.
    """
    config = MigrationTrainConfig() if config is None else config
    if not dataset:
        raise ValueError("training set is empty")
    pairs = [prepare_pair(b, m) for b, m in dataset]
    shape = pairs[0][0].shape
    for i, (x, y) in enumerate(pairs):
        if x.shape != shape or y.shape != shape:
            raise ValueError(f"pair {i}: shape {x.shape}/{y.shape} differs from {shape}")
        model.check_input(x)

    rng = np.random.default_rng(config.seed)
    opt = Adam(model.named_parameters(), learning_rate=config.learning_rate)
    result = MigrationTrainResult()
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs)) if config.shuffle else np.arange(len(pairs))
        losses = []
        accs = []
        for idx in order:
            x, y = pairs[idx]
            snapshot = model.state_dict()
            opt.zero_grad()
            logits = model(x)
            loss = ops.bce_with_logits(logits, y[None])
            value = float(loss.data)
            if not np.isfinite(value):
                model.load_state_dict(snapshot)
                if config.checkpoint_path:
                    save_checkpoint(snapshot, config.checkpoint_path)
                raise NumericalError(f"non-finite loss at step {result.steps + 1}")
            loss.backward()
            opt.step()
            result.steps += 1
            result.step_losses.append(value)
            losses.append(value)
            accs.append(pixel_accuracy(1.0 / (1.0 + np.exp(-logits.data[0])), y))
        result.epoch_losses.append(float(np.mean(losses)))
        result.accuracies.append(float(np.min(accs)))
        logger.info("epoch %d: loss %.5f, min pixel accuracy %.4f", epoch + 1, result.epoch_losses[-1],
                    result.accuracies[-1])
        if config.target_accuracy is not None and result.accuracies[-1] > config.target_accuracy:
            break
    if config.checkpoint_path:
        save_checkpoint(model.state_dict(), config.checkpoint_path)
    return result
