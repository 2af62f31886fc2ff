"""scikit-learn style wrappers around migration and completion.

Hyper-parameters go to ``__init__`` untouched, so ``get_params`` /
``set_params`` / ``clone`` work as usual; fitted state ends with ``_``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_bscans, check_cloud, check_cloud_batch
from .cloud import chamfer_distance
from .gprnet import GPRNet, GPRNetConfig, TrainConfig, train_gprnet
from .gprnet.model import N_INPUT
from .migration import MigrationNet, MigrationTrainConfig, normalize_bscan, train_migrationnet
from .pipeline import line_grid, migrate_bpa, migrate_net
from .scene import CrossSection


class BackProjectionMigrator(BaseEstimator, TransformerMixin):
    """B-scans -> binary cross-sections by back-projection. Nothing is learned;
    ``fit`` only records the medium permittivity."""

    def __init__(self, eps_r=None, height=128, width=128, mode="coherent", threshold=0.5):
        self.eps_r = eps_r
        self.height = height
        self.width = width
        self.mode = mode
        self.threshold = threshold

    def fit(self, X=None, y=None):
        if self.eps_r is None or not self.eps_r >= 1:
            raise ValueError(f"eps_r must be >= 1, got {self.eps_r}")
        if self.mode not in ("abs", "coherent"):
            raise ValueError(f"mode must be 'abs' or 'coherent', got {self.mode!r}")
        self.eps_r_ = float(self.eps_r)
        return self

    def transform(self, X) -> list[CrossSection]:
        check_is_fitted(self, "eps_r_")
        return [migrate_bpa(b, self.eps_r_, line_grid(b, self.height, self.width), self.mode, self.threshold)
                for b in check_bscans(X)]


class MigrationNetSegmenter(BaseEstimator, TransformerMixin):
    """B-scans -> binary cross-sections with a trained :class:`MigrationNet`."""

    def __init__(self, width=32, epochs=10, learning_rate=1e-3, seed=0, threshold=0.5, target_accuracy=None):
        self.width = width
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.threshold = threshold
        self.target_accuracy = target_accuracy

    def fit(self, X, y):
        bscans = check_bscans(X)
        masks = list(y)
        if len(masks) != len(bscans):
            raise ValueError(f"{len(bscans)} B-scans but {len(masks)} masks")
        self.model_ = MigrationNet(self.width, seed=self.seed)
        cfg = MigrationTrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed,
                                   target_accuracy=self.target_accuracy)
        self.history_ = train_migrationnet(self.model_, list(zip(bscans, masks)), cfg)
        first = masks[0].mask if isinstance(masks[0], CrossSection) else np.asarray(masks[0])
        self.grid_shape_ = first.shape
        return self

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [self.model_.predict_proba(normalize_bscan(b.amplitudes, self.grid_shape_)) for b in check_bscans(X)]

    def transform(self, X) -> list[CrossSection]:
        check_is_fitted(self, "model_")
        h, w = self.grid_shape_
        return [migrate_net(b, self.model_, line_grid(b, h, w), self.threshold) for b in check_bscans(X)]

    def predict(self, X) -> list[np.ndarray]:
        return [(p >= self.threshold).astype(np.uint8) for p in self.predict_proba(X)]


class GPRNetCompleter(BaseEstimator, TransformerMixin):
    """Sparse ``(1500, 3)`` clouds -> dense ``(8064, 3)`` clouds."""

    def __init__(self, width_multiplier=0.25, patch_size=0.02, epochs=100, batch_size=16, learning_rate=5e-5,
                 lr_decay=0.7, lr_decay_steps=50_000, max_steps=None, seed=0):
        self.width_multiplier = width_multiplier
        self.patch_size = patch_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.lr_decay_steps = lr_decay_steps
        self.max_steps = max_steps
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
                           lr_decay=self.lr_decay, lr_decay_steps=self.lr_decay_steps, seed=self.seed,
                           max_steps=self.max_steps)

    def fit(self, X, y, X_val=None, y_val=None):
        sparse = check_cloud_batch(X, N_INPUT, "X")
        dense = check_cloud_batch(y, name="y")
        if len(sparse) != len(dense):
            raise ValueError(f"{len(sparse)} inputs but {len(dense)} targets")
        val = []
        if X_val is not None:
            val = list(zip(check_cloud_batch(X_val, N_INPUT, "X_val"), check_cloud_batch(y_val, name="y_val")))
        model = GPRNet(GPRNetConfig(self.width_multiplier, self.patch_size), seed=self.seed)
        self.model_, self.log_ = train_gprnet(list(zip(sparse, dense)), self._train_config(), val, model=model)
        return self

    @classmethod
    def from_model(cls, model: GPRNet) -> "GPRNetCompleter":
        """Wrap an already trained network (e.g. loaded from a checkpoint)."""
        est = cls(width_multiplier=model.config.width_multiplier, patch_size=model.config.patch_size)
        est.model_ = model
        return est

    def predict_one(self, cloud) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.predict(check_cloud(cloud, N_INPUT))

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return np.stack([self.model_.predict(c) for c in check_cloud_batch(X, N_INPUT)])

    def transform(self, X) -> np.ndarray:
        return self.predict(X)

    def score(self, X, y) -> float:
        """Negative mean squared Chamfer distance (higher is better)."""
        pred = self.predict(X)
        dense = check_cloud_batch(y, name="y")
        return -float(np.mean([chamfer_distance(p, d, return_grad=False) for p, d in zip(pred, dense)]))
