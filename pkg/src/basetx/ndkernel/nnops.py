"""Convolution, pooling and batch normalization kernels.

conv2d uses an im2col lowering so both directions reduce to one big
matmul; maxpool routes gradients to the first max per window; batch
normalization keeps running statistics as caller-owned numpy buffers.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import ShapeError, Tensor, _as_tensor, _emit


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    b, c, h, w = xp.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = as_strided(
        xp,
        shape=(b, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
    )
    # copy into (B, C*KH*KW, OH*OW) so matmul gets contiguous memory
    return np.ascontiguousarray(view).reshape(b, c * kh * kw, oh * ow)


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution: x (B,C,H,W) * w (OC,C,KH,KW) + b (OC,)."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(
            f"conv2d expects 4-D input and weight, got {x.data.shape} and {w.data.shape}"
        )
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.data.shape} vs weight {w.data.shape}"
        )
    bt, c, h, wd = x.data.shape
    oc, _, kh, kw = w.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, kh, kw, stride)  # (B, CKK, L)
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    wmat = w.data.reshape(oc, -1)
    out = np.matmul(wmat, cols)  # (B, OC, L)
    if b is not None:
        b = _as_tensor(b, like=x)
        out = out + b.data[:, None]
    out = out.reshape(bt, oc, oh, ow)
    inputs = (x, w) if b is None else (x, w, b)

    def back(g):
        gm = g.reshape(bt, oc, oh * ow)
        gw = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
        gcols = np.matmul(wmat.T, gm)  # (B, CKK, L)
        gcols = gcols.reshape(bt, c, kh, kw, oh, ow)
        gxp = np.zeros_like(xp)
        for ki in range(kh):
            for kj in range(kw):
                gxp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += gcols[
                    :, :, ki, kj
                ]
        gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return _emit("conv2d", out, inputs, back)


def maxpool2d(x, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; odd trailing rows/cols are dropped."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d expects 4-D input, got {x.data.shape}")
    b, c, h, w = x.data.shape
    oh, ow = h // size, w // size
    if oh == 0 or ow == 0:
        raise ShapeError(f"maxpool2d window {size} larger than input {x.data.shape}")
    cropped = x.data[:, :, : oh * size, : ow * size]
    windows = cropped.reshape(b, c, oh, size, ow, size).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(b, c, oh, ow, size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def back(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, arg[..., None], g[..., None], axis=-1)
        gwin = gflat.reshape(b, c, oh, ow, size, size).transpose(0, 1, 2, 4, 3, 5)
        gx = np.zeros_like(x.data)
        gx[:, :, : oh * size, : ow * size] = gwin.reshape(b, c, oh * size, ow * size)
        return (gx,)

    return _emit("maxpool2d", out, (x,), back)


def batchnorm2d(
    x,
    gamma,
    beta,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization over (B,H,W).

    Training mode normalizes with batch statistics (biased variance) and
    updates the caller-owned running buffers in place; eval mode uses the
    running statistics and never writes them.
    """
    x = _as_tensor(x)
    gamma = _as_tensor(gamma, like=x)
    beta = _as_tensor(beta, like=x)
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d expects 4-D input, got {x.data.shape}")
    axes = (0, 2, 3)
    gshape = (1, -1, 1, 1)
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(gshape)) * inv_std.reshape(gshape)
    out = gamma.data.reshape(gshape) * xhat + beta.data.reshape(gshape)
    n = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]

    def back(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(gshape)
        if training:
            dx = (
                inv_std.reshape(gshape)
                / n
                * (
                    n * dxhat
                    - dxhat.sum(axis=axes, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
                )
            )
        else:
            dx = dxhat * inv_std.reshape(gshape)
        return dx, dgamma, dbeta

    return _emit("batchnorm2d", out, (x, gamma, beta), back)
