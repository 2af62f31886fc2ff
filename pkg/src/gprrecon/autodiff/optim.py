"""Adam optimiser and step-decay learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


class NumericalError(FloatingPointError):
    """Non-finite value met during optimisation."""


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def step_decay_lr(step: int, base_lr: float, factor: float = 0.7, interval: int = 50_000) -> float:
    """Learning rate after ``step`` optimiser steps: ``base * factor ** (step // interval)``."""
    return base_lr * factor ** (step // interval)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              names: Sequence[str] | None = None) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns new parameter arrays and
    mutates ``state`` (moments, step count)."""
    if len(params) != len(grads):
        raise ValueError(f"adam_step: {len(params)} params but {len(grads)} grads")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            label = names[i] if names is not None else f"#{i}"
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise NumericalError(f"non-finite gradient in parameter {label} "
                                 f"({bad} of {np.size(g)} entries) at step {state.step + 1}")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    out = []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if m.shape != p.shape:
            raise ValueError(f"adam_step: moment shape {m.shape} vs parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        out.append(p - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon))
    return out


class Adam:
    """Adam over a fixed list of tracked tensors with an optional step-decay schedule."""

    def __init__(self, named_params, learning_rate: float = 1e-3, decay_factor: float = 1.0,
                 decay_interval: int = 50_000, **kwargs):
        named_params = list(named_params)
        self.names = [n for n, _ in named_params]
        self.params: list[Tensor] = [p for _, p in named_params]
        self.base_lr = learning_rate
        self.decay_factor = decay_factor
        self.decay_interval = decay_interval
        self.state = AdamState(learning_rate=learning_rate, **kwargs)

    @property
    def lr(self) -> float:
        return step_decay_lr(self.state.step, self.base_lr, self.decay_factor, self.decay_interval)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.state.learning_rate = self.lr
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        new = adam_step([p.data for p in self.params], grads, self.state, self.names)
        for p, value in zip(self.params, new):
            p.data = value
