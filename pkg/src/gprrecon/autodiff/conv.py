"""Single-image 2-d convolution, max-pooling and transposed convolution.

Images are ``(channels, height, width)``; there is no batch axis.
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, ShapeError, as_tensor, shape_mismatch


def conv_output_size(size: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x (C_in, H, W)`` with ``weight (C_out, C_in, kh, kw)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[1] != x.shape[0]:
        raise shape_mismatch("conv2d", x.shape, weight.shape)
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d: stride must be >= 1 and padding >= 0, got {stride}, {padding}")
    c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d: kernel {(kh, kw)} larger than padded input {(hp, wp)}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding))) if padding else x.data
    wd = weight.data
    # im2col: rows ordered (c_in, kh, kw) to match weight.reshape(c_out, -1)
    cols = np.empty((c_in, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
    cols = cols.reshape(c_in * kh * kw, ho * wo)
    out = (wd.reshape(c_out, -1) @ cols).reshape(c_out, ho, wo)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise shape_mismatch("conv2d(bias)", bias.shape, (c_out,))
        out += bias.data[:, None, None]
        parents.append(bias)

    def backward(g):
        g2 = g.reshape(c_out, -1)
        gw = (g2 @ cols.T).reshape(wd.shape)
        gcols = (wd.reshape(c_out, -1).T @ g2).reshape(c_in, kh, kw, ho, wo)
        gx = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gx[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += gcols[:, i, j]
        if padding:
            gx = gx[:, padding:padding + h, padding:padding + w]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=1))
        return grads

    return Tensor._from_op(out, parents, backward, "conv2d")


def maxpool2d(x, kernel: int) -> Tensor:
    """Non-overlapping max-pooling (stride = kernel); trailing rows/cols that
    do not fill a window are dropped. Ties send the gradient to the first
    maximum in row-major window order."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"maxpool2d: expected (C, H, W), got {x.shape}")
    c, h, w = x.shape
    if kernel < 1 or kernel > h or kernel > w:
        raise ShapeError(f"maxpool2d: kernel {kernel} does not fit input {(h, w)}")
    ho, wo = h // kernel, w // kernel
    crop = x.data[:, :ho * kernel, :wo * kernel]
    windows = crop.reshape(c, ho, kernel, wo, kernel).transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, kernel * kernel)
    idx = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        gcrop = gw.reshape(c, ho, wo, kernel, kernel).transpose(0, 1, 3, 2, 4).reshape(c, ho * kernel, wo * kernel)
        if gcrop.shape == x.shape:
            return (gcrop,)
        gx = np.zeros_like(x.data)
        gx[:, :ho * kernel, :wo * kernel] = gcrop
        return (gx,)

    return Tensor._from_op(out, (x,), backward, "maxpool2d")


def deconv2d(x, weight, bias=None, stride: int = 2) -> Tensor:
    """Transposed convolution of ``x (C_in, H, W)`` with ``weight (C_in, C_out, k, k)``.

    Output spatial size is ``(H - 1) * stride + k``; kernel 2 with stride 2
    doubles each dimension.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[0] != x.shape[0]:
        raise shape_mismatch("deconv2d", x.shape, weight.shape)
    if stride < 1:
        raise ValueError(f"deconv2d: stride must be >= 1, got {stride}")
    c_in, h, w = x.shape
    _, c_out, kh, kw = weight.shape
    ho, wo = (h - 1) * stride + kh, (w - 1) * stride + kw
    xd = x.data.reshape(c_in, -1)
    wd = weight.data
    out = np.zeros((c_out, ho, wo))
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + stride * (h - 1) + 1:stride, j:j + stride * (w - 1) + 1:stride] += \
                (wd[:, :, i, j].T @ xd).reshape(c_out, h, w)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise shape_mismatch("deconv2d(bias)", bias.shape, (c_out,))
        out += bias.data[:, None, None]
        parents.append(bias)

    def backward(g):
        gx = np.zeros((c_in, h * w))
        gw = np.empty_like(wd)
        for i in range(kh):
            for j in range(kw):
                gs = g[:, i:i + stride * (h - 1) + 1:stride, j:j + stride * (w - 1) + 1:stride].reshape(c_out, -1)
                gx += wd[:, :, i, j] @ gs
                gw[:, :, i, j] = xd @ gs.T
        grads = [gx.reshape(c_in, h, w), gw]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)))
        return grads

    return Tensor._from_op(out, parents, backward, "deconv2d")
