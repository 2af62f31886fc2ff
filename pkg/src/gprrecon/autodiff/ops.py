"""Differentiable primitives.

Shape rules are deliberately strict: elementwise ops need identical shapes,
and the only implicit expansion is the bias row in :func:`linear` and the
explicit :func:`tile_rows` / :func:`repeat_rows`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor, ShapeError, as_tensor, shape_mismatch


def _same_shape(op, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise shape_mismatch(op, a.shape, b.shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return Tensor._from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    return Tensor._from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return Tensor._from_op(a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a, b) -> Tensor:
    """2-d matrix product ``(n, k) @ (k, m) -> (n, m)``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise shape_mismatch("matmul", a.shape, b.shape)

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._from_op(a.data @ b.data, (a, b), backward, "matmul")


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with ``x (n, i)``, ``weight (i, o)``, ``bias (o,)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise shape_mismatch("linear", x.shape, weight.shape)
    out = x.data @ weight.data
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise shape_mismatch("linear(bias)", bias.shape, (weight.shape[1],))
        out = out + bias.data
        parents.append(bias)

    def backward(g):
        grads = [g @ weight.data.T, x.data.T @ g]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return Tensor._from_op(out, parents, backward, "linear")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._from_op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no inputs")
    ndim = tensors[0].ndim
    axis = axis % ndim
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[d] != ref[d] for d in range(ndim) if d != axis):
            raise shape_mismatch(f"concat(axis={axis})", ref, t.shape)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        index = [slice(None)] * ndim
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(int(lo), int(hi))
            grads.append(g[tuple(index)])
        return grads

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size or any(s < 0 for s in shape):
        raise shape_mismatch("reshape", a.shape, shape)
    old = a.shape
    return Tensor._from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected a 2-d tensor, got shape {a.shape}")
    return Tensor._from_op(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def max_reduce(a, axis: int = 0) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    a = as_tensor(a)
    axis = axis % a.ndim
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return Tensor._from_op(out, (a,), backward, "max_reduce")


def sum(a) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    return Tensor._from_op(np.array(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),), "sum")


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.size
    return Tensor._from_op(np.array(a.data.mean()), (a,), lambda g: (np.full(a.shape, float(g) / n),), "mean")


def tile_rows(a, m: int) -> Tensor:
    """Broadcast a row vector ``(c,)`` or ``(1, c)`` to ``(m, c)``."""
    a = as_tensor(a)
    row = a.data.reshape(-1)
    if a.ndim == 2 and a.shape[0] != 1 or a.ndim > 2:
        raise ShapeError(f"tile_rows: expected (c,) or (1, c), got {a.shape}")
    old = a.shape
    out = np.broadcast_to(row, (m, row.size)).copy()
    return Tensor._from_op(out, (a,), lambda g: (g.sum(axis=0).reshape(old),), "tile_rows")


def repeat_rows(a, k: int) -> Tensor:
    """Repeat each row of a 2-d tensor ``k`` times consecutively."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"repeat_rows: expected a 2-d tensor, got {a.shape}")
    n, c = a.shape
    return Tensor._from_op(np.repeat(a.data, k, axis=0), (a,),
                           lambda g: (g.reshape(n, k, c).sum(axis=1),), "repeat_rows")


def bce_with_logits(logits, target) -> Tensor:
    """Mean binary cross-entropy computed from logits (numerically stable)."""
    logits = as_tensor(logits)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != logits.shape:
        raise shape_mismatch("bce_with_logits", logits.shape, t.shape)
    z = logits.data
    loss = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def backward(g):
        return (float(g) * (_sigmoid(z) - t) / n,)

    return Tensor._from_op(np.array(loss.mean()), (logits,), backward, "bce_with_logits")


def binary_cross_entropy(probs, target, eps: float = 1e-12) -> Tensor:
    """Mean binary cross-entropy of probabilities, clipped to ``[eps, 1 - eps]``."""
    probs = as_tensor(probs)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != probs.shape:
        raise shape_mismatch("binary_cross_entropy", probs.shape, t.shape)
    p = np.clip(probs.data, eps, 1.0 - eps)
    loss = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    n = p.size

    def backward(g):
        inside = (probs.data > eps) & (probs.data < 1.0 - eps)
        return (float(g) * inside * (p - t) / (p * (1.0 - p)) / n,)

    return Tensor._from_op(np.array(loss.mean()), (probs,), backward, "binary_cross_entropy")
