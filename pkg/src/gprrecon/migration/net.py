"""MigrationNet: multi-resolution encoder and skip-connected decoder that maps a
normalised B-scan to per-pixel pipe probabilities."""
from __future__ import annotations

import numpy as np

from ..autodiff import Module, Conv2d, Deconv2d, Tensor, ShapeError, ops, maxpool2d
from ..autodiff.ops import _sigmoid

POOL_FACTOR = 8
# max-pool kernels of the three encoder branches; each multiplies to 8
BRANCH_POOLS = ((8,), (4, 2), (2, 2, 2))


class DownGroup(Module):
    """conv-relu-conv-relu, then max-pool; also returns the pre-pool map."""

    def __init__(self, c_in: int, c_out: int, pool: int, rng):
        super().__init__()
        self.pool = pool
        self.conv1 = self.add_module("conv1", Conv2d(c_in, c_out, 3, rng))
        self.conv2 = self.add_module("conv2", Conv2d(c_out, c_out, 3, rng))

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        pre = ops.relu(self.conv2(ops.relu(self.conv1(x))))
        return maxpool2d(pre, self.pool), pre


class UpGroup(Module):
    """conv-relu-conv-relu, then a transposed convolution (x2 when ``scale``,
    a 1x1 resolution-preserving one otherwise)."""

    def __init__(self, c_in: int, c_out: int, scale: bool, rng):
        super().__init__()
        self.conv1 = self.add_module("conv1", Conv2d(c_in, c_out, 3, rng))
        self.conv2 = self.add_module("conv2", Conv2d(c_out, c_out, 3, rng))
        k = 2 if scale else 1
        self.deconv = self.add_module("deconv", Deconv2d(c_out, c_out, k, k, rng))

    def forward(self, x: Tensor) -> Tensor:
        return ops.relu(self.deconv(ops.relu(self.conv2(ops.relu(self.conv1(x))))))


def branch_widths(width: int, n_groups: int) -> list[int]:
    """Channel schedule of a branch with ``n_groups`` down groups ending at ``width``."""
    return [max(1, width >> (n_groups - 1 - g)) for g in range(n_groups)]


class MigrationNet(Module):
    """Encoder: three branches pooled by (8), (4, 2), (2, 2, 2) that meet at
    1/8 resolution and are concatenated to ``3 * width`` channels (1536 at
    ``width=512``). Decoder: five groups, two at 1/8 resolution then three x2
    up-sampling ones, each followed by channel concatenation with the
    encoder's pre-pool maps of matching resolution. A 1-channel head gives
    logits."""

    def __init__(self, width: int = 32, seed: int = 0):
        super().__init__()
        self.width = width
        rng = np.random.default_rng(seed)
        self.branches: list[list[DownGroup]] = []
        for b, pools in enumerate(BRANCH_POOLS):
            widths = branch_widths(width, len(pools))
            groups, c_in = [], 1
            for g, (pool, c) in enumerate(zip(pools, widths)):
                groups.append(self.add_module(f"enc{b}.group{g}", DownGroup(c_in, c, pool, rng)))
                c_in = c
            self.branches.append(groups)

        w, q = width, max(1, width // 4)
        h = max(1, width // 2)
        self.skip_channels = self._skip_channels()
        self.dec = [
            self.add_module("dec0", UpGroup(3 * w, w, False, rng)),
            self.add_module("dec1", UpGroup(w, w, False, rng)),
            self.add_module("dec2", UpGroup(w, h, True, rng)),
            self.add_module("dec3", UpGroup(h + self.skip_channels[4], q, True, rng)),
            self.add_module("dec4", UpGroup(q + self.skip_channels[2], q, True, rng)),
        ]
        self.head1 = self.add_module("head1", Conv2d(q + self.skip_channels[1], q, 3, rng))
        self.head2 = self.add_module("head2", Conv2d(q, 1, 1, rng))

    def _skip_channels(self) -> dict[int, int]:
        """Total pre-pool channels available at each down-sampling factor."""
        out = {1: 0, 2: 0, 4: 0}
        for pools in BRANCH_POOLS:
            scale = 1
            for pool, c in zip(pools, branch_widths(self.width, len(pools))):
                out[scale] += c
                scale *= pool
        return out

    def check_input(self, x: np.ndarray) -> None:
        if x.ndim != 2:
            raise ShapeError(f"MigrationNet expects a 2-d B-scan image, got {x.shape}")
        h, w = x.shape
        if h % POOL_FACTOR or w % POOL_FACTOR:
            ph, pw = -h % POOL_FACTOR, -w % POOL_FACTOR
            raise ShapeError(f"input {h}x{w} not divisible by {POOL_FACTOR}: pad by {ph} rows and {pw} columns")

    def encode(self, x: Tensor) -> tuple[list[Tensor], dict[int, list[Tensor]]]:
        """Branch outputs (all at 1/8 resolution) and pre-pool skips keyed by scale."""
        outs: list[Tensor] = []
        skips: dict[int, list[Tensor]] = {1: [], 2: [], 4: []}
        for pools, groups in zip(BRANCH_POOLS, self.branches):
            h, scale = x, 1
            for pool, group in zip(pools, groups):
                h, pre = group(h)
                skips[scale].append(pre)
                scale *= pool
            outs.append(h)
        return outs, skips

    def forward(self, x) -> Tensor:
        """Logits ``(1, H, W)`` for a normalised ``(H, W)`` image."""
        arr = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
        self.check_input(arr)
        inp = Tensor(arr[None, :, :])
        outs, skips = self.encode(inp)
        feat = ops.concat(outs, axis=0)
        feat = self.dec[1](self.dec[0](feat))
        feat = self.dec[2](feat)                                   # 1/4
        feat = self.dec[3](ops.concat([feat] + skips[4], axis=0))  # 1/2
        feat = self.dec[4](ops.concat([feat] + skips[2], axis=0))  # 1/1
        feat = ops.concat([feat] + skips[1], axis=0)
        return self.head2(ops.relu(self.head1(feat)))

    def predict_proba(self, x) -> np.ndarray:
        return _sigmoid(self.forward(x).data[0])


def normalize_bscan(amplitudes: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Min-max scale to [0, 1] (constant input -> zeros), optionally resampled to ``shape``."""
    a = np.asarray(amplitudes, dtype=np.float64)
    if shape is not None and a.shape != tuple(shape):
        a = resample_image(a, shape)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def resample_image(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Block-mean when ``shape`` divides ``a.shape``, bilinear otherwise."""
    h, w = a.shape
    th, tw = shape
    if h % th == 0 and w % tw == 0:
        return a.reshape(th, h // th, tw, w // tw).mean(axis=(1, 3))
    from scipy.ndimage import zoom
    return zoom(a, (th / h, tw / w), order=1)
