"""Minimal reverse-mode automatic differentiation on numpy arrays."""
from .tensor import Tensor, ShapeError, build_tape, as_tensor
from . import ops
from .ops import (add, sub, mul, scale, matmul, linear, relu, sigmoid, concat, reshape, transpose,
                  max_reduce, mean, tile_rows, repeat_rows, bce_with_logits, binary_cross_entropy)
from .conv import conv2d, maxpool2d, deconv2d, conv_output_size
from .nn import Module, Linear, SharedMLP, Conv2d, Deconv2d, shared_mlp
from .optim import Adam, AdamState, adam_step, step_decay_lr, NumericalError
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError
from .gradcheck import numerical_gradient, relative_error, smooth_indices

__all__ = [
    "Tensor", "ShapeError", "build_tape", "as_tensor", "ops",
    "add", "sub", "mul", "scale", "matmul", "linear", "relu", "sigmoid", "concat", "reshape",
    "transpose", "max_reduce", "mean", "tile_rows", "repeat_rows", "bce_with_logits",
    "binary_cross_entropy", "conv2d", "maxpool2d", "deconv2d", "conv_output_size",
    "Module", "Linear", "SharedMLP", "Conv2d", "Deconv2d", "shared_mlp",
    "Adam", "AdamState", "adam_step", "step_decay_lr", "NumericalError",
    "save_checkpoint", "load_checkpoint", "CheckpointError",
    "numerical_gradient", "relative_error", "smooth_indices",
]
