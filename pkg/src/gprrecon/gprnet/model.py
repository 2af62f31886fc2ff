"""GPRNet: sparse 1500-point cloud -> 896-d global feature -> dense 8064 points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Module, Linear, SharedMLP, Tensor, ShapeError, ops

N_INPUT = 1500
GLOBAL_DIM = 896
STACK_WIDTHS = (64, 128, 256)
LOCAL_SIZES = (256, 128, 64)
PATCH = 9
N_SEEDS = 2 * sum(LOCAL_SIZES)        # local 448 + global complement 448
N_OUTPUT = N_SEEDS * PATCH            # 8064


@dataclass(frozen=True)
class GPRNetConfig:
    """Architecture knobs. ``width_multiplier`` scales hidden widths only;
    the 896-d feature, the 896 seeds and the 9-point patches are fixed."""
    width_multiplier: float = 0.25
    patch_size: float = 0.02          # side of the 3x3 folding grid, metres
    n_input: int = N_INPUT

    def hidden(self, n: int) -> int:
        return max(1, int(round(n * self.width_multiplier)))


def folding_grid(side: float) -> np.ndarray:
    """3x3 planar grid (9, 2) spanning ``[-side/2, side/2]^2``."""
    g = np.linspace(-side / 2.0, side / 2.0, 3)
    u, v = np.meshgrid(g, g, indexing="ij")
    return np.stack([u.ravel(), v.ravel()], axis=1)


class GPRNet(Module):
    def __init__(self, config: GPRNetConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = cfg = GPRNetConfig() if config is None else config
        rng = np.random.default_rng(seed)

        # encoder: three stacks producing f_1..f_3, pooled to g_1..g_3
        self.stack_dims = tuple(cfg.hidden(w) for w in STACK_WIDTHS)
        self.stacks = [
            self.add_module(f"enc.stack{i}", SharedMLP(3, [cfg.hidden(w // 2), d], rng))
            for i, (w, d) in enumerate(zip(STACK_WIDTHS, self.stack_dims))
        ]
        # every g_j is appended to every f_i: 9 blocks of width d_i + d_j
        fused = sum(di + dj for di in self.stack_dims for dj in self.stack_dims)
        self.fused_dim = fused
        self.fuse = self.add_module("enc.fuse", SharedMLP(fused, [cfg.hidden(512), GLOBAL_DIM], rng,
                                                          final_activation=False))

        # decoder: local heads 896 -> n_k -> n_k x 3, global heads 896 -> n_k x 3
        self.local_hidden = [self.add_module(f"dec.local{k}.fc", Linear(GLOBAL_DIM, n, rng))
                             for k, n in enumerate(LOCAL_SIZES)]
        self.local_out = [self.add_module(f"dec.local{k}.out", Linear(n, 3 * n, rng))
                          for k, n in enumerate(LOCAL_SIZES)]
        self.global_hidden = [self.add_module(f"dec.global{k}.fc", Linear(GLOBAL_DIM, cfg.hidden(n), rng))
                              for k, n in enumerate(LOCAL_SIZES)]
        self.global_out = [self.add_module(f"dec.global{k}.out", Linear(cfg.hidden(n), 3 * n, rng))
                           for k, n in enumerate(LOCAL_SIZES)]

        # folding: [grid (2), seed (3), v (896)] -> hidden -> hidden -> offset (3)
        fh = cfg.hidden(512)
        self.fold_grid = self.add_module("fold.grid", Linear(2, fh, rng))
        self.fold_seed = self.add_module("fold.seed", Linear(3, fh, rng))
        self.fold_feat = self.add_module("fold.feat", Linear(GLOBAL_DIM, fh, rng))
        self.fold_hidden = self.add_module("fold.hidden", Linear(fh, fh, rng))
        self.fold_out = self.add_module("fold.out", Linear(fh, 3, rng))
        # small initial offsets keep each patch near its seed
        self.fold_out.weight.data *= 0.01
        self.grid = folding_grid(cfg.patch_size)

    # -- encoder --------------------------------------------------------------
    def point_features(self, cloud: Tensor) -> list[Tensor]:
        return [stack(cloud) for stack in self.stacks]

    def encode(self, cloud) -> Tensor:
        """Global feature ``(896,)``; invariant to the order of input points."""
        cloud = cloud if isinstance(cloud, Tensor) else Tensor(np.asarray(cloud, dtype=np.float64))
        m = self.config.n_input
        if cloud.shape != (m, 3):
            raise ShapeError(f"encode: expected a ({m}, 3) cloud, got {cloud.shape}; resample first")
        f = self.point_features(cloud)
        g = [ops.max_reduce(fi, axis=0) for fi in f]
        blocks = []
        for fi in f:
            for gj in g:
                blocks.append(fi)
                blocks.append(ops.tile_rows(gj, m))
        fused = ops.concat(blocks, axis=1)
        return ops.max_reduce(self.fuse(fused), axis=0)

    # -- decoder ----------------------------------------------------------------
    def seeds(self, v: Tensor) -> Tensor:
        """``(896, 3)`` seed matrix: local 256/128/64 rows then the global complement."""
        v_row = ops.reshape(v, (1, GLOBAL_DIM))
        parts = []
        for hid, out, n in zip(self.local_hidden, self.local_out, LOCAL_SIZES):
            parts.append(ops.reshape(out(ops.relu(hid(v_row))), (n, 3)))
        for hid, out, n in zip(self.global_hidden, self.global_out, LOCAL_SIZES):
            parts.append(ops.reshape(out(ops.relu(hid(v_row))), (n, 3)))
        return ops.concat(parts, axis=0)

    def fold(self, seeds: Tensor, v: Tensor) -> Tensor:
        """Offsets ``(8064, 3)`` for each seed's 9-point patch."""
        n = seeds.shape[0]
        grid = Tensor(np.tile(self.grid, (n, 1)))
        h = ops.add(self.fold_grid(grid), self.fold_seed(ops.repeat_rows(seeds, PATCH)))
        feat = self.fold_feat(ops.reshape(v, (1, GLOBAL_DIM)))
        h = ops.relu(ops.add(h, ops.tile_rows(feat, n * PATCH)))
        h = ops.relu(self.fold_hidden(h))
        return self.fold_out(h)

    def decode(self, v) -> Tensor:
        v = v if isinstance(v, Tensor) else Tensor(np.asarray(v, dtype=np.float64))
        if v.shape != (GLOBAL_DIM,):
            raise ShapeError(f"decode: expected a ({GLOBAL_DIM},) feature, got {v.shape}")
        seeds = self.seeds(v)
        return ops.add(ops.repeat_rows(seeds, PATCH), self.fold(seeds, v))

    def forward(self, cloud) -> Tensor:
        return self.decode(self.encode(cloud))

    def predict(self, cloud) -> np.ndarray:
        return self.forward(cloud).data

    def zero_folding(self) -> None:
        """Zero the folding output layer so every patch collapses onto its seed."""
        self.fold_out.weight.data[:] = 0.0
        self.fold_out.bias.data[:] = 0.0
