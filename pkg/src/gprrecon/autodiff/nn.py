"""Parameter containers and the layers both networks are built from."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Sequence

import numpy as np

from . import ops
from .conv import conv2d, deconv2d
from .tensor import Tensor, ShapeError


class Module:
    """Owns named parameters and child modules, in registration order."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._children: "OrderedDict[str, Module]" = OrderedDict()

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        p = Tensor(value, requires_grad=True)
        self._params[name] = p
        return p

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, p.data.copy()) for n, p in self.named_parameters())

    def load_state_dict(self, state) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {value.shape} vs model shape {p.shape}")
            p.data = value.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, zero: bool = False):
        super().__init__()
        self.d_in, self.d_out = d_in, d_out
        w = np.zeros((d_in, d_out)) if zero else he_uniform(rng, (d_in, d_out), d_in)
        self.weight = self.add_param("weight", w)
        self.bias = self.add_param("bias", np.zeros(d_out))

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class SharedMLP(Module):
    """Pointwise MLP: the same weights applied to every row of an ``(m, d_in)`` input.

    ReLU follows every layer except, when ``final_activation`` is false, the last.
    """

    def __init__(self, d_in: int, layer_dims: Sequence[int], rng: np.random.Generator,
                 final_activation: bool = True):
        super().__init__()
        if not layer_dims:
            raise ValueError("SharedMLP needs at least one layer")
        self.d_in = d_in
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.final_activation = final_activation
        self.layers: list[Linear] = []
        prev = d_in
        for i, d in enumerate(self.layer_dims):
            self.layers.append(self.add_module(f"layer{i}", Linear(prev, d, rng)))
            prev = d

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]

    def forward(self, points: Tensor) -> Tensor:
        if points.ndim != 2 or points.shape[0] == 0:
            raise ShapeError(f"shared_mlp: expected a non-empty (m, {self.d_in}) point set, got {points.shape}")
        if points.shape[1] != self.d_in:
            raise ShapeError(f"shared_mlp: expected {self.d_in} input features, got {points.shape[1]}")
        x = points
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_activation:
                x = ops.relu(x)
        return x


def shared_mlp(points: Tensor, layer_dims: Sequence[int], rng: np.random.Generator | None = None,
               final_activation: bool = True) -> Tensor:
    """Functional form of :class:`SharedMLP` with freshly initialised weights."""
    rng = np.random.default_rng(0) if rng is None else rng
    points = points if isinstance(points, Tensor) else Tensor(points)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ShapeError(f"shared_mlp: expected a non-empty (m, d) point set, got {points.shape}")
    return SharedMLP(points.shape[1], layer_dims, rng, final_activation)(points)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int | None = None):
        super().__init__()
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        self.weight = self.add_param("weight", he_uniform(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel))
        self.bias = self.add_param("bias", np.zeros(c_out))

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Deconv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, rng: np.random.Generator):
        super().__init__()
        self.stride = stride
        self.weight = self.add_param("weight", he_uniform(rng, (c_in, c_out, kernel, kernel), c_in))
        self.bias = self.add_param("bias", np.zeros(c_out))

    def forward(self, x: Tensor) -> Tensor:
        return deconv2d(x, self.weight, self.bias, stride=self.stride)
