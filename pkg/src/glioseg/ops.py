"""Differentiable network operations over NCHW tensors.

Convolution follows the cross-correlation convention (no kernel flip).
"same" padding means symmetric zero padding of k//2 and is only defined for
odd kernels at stride 1.  The hot spatial loops live in ``glioseg.backends``;
everything else composes from ``Tensor`` primitives.
"""

import numpy as np

from . import backends
from .tensor import Tensor


def relu(x):
    a = Tensor._coerce(x)
    mask = a.data > 0

    def bw(g):
        a._accum(g * mask)

    return Tensor._make(np.where(mask, a.data, 0.0), (a,), "relu", bw)


# Probability outputs are nudged inside the open interval (0, 1) so that
# downstream logs and the >= gate at threshold 1.0 stay well defined even
# when float rounding would otherwise produce exact 0 or 1.
_PROB_FLOOR = 1e-12


def sigmoid(x):
    a = Tensor._coerce(x)
    out_data = np.empty_like(a.data)
    pos = a.data >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out_data[~pos] = ez / (1.0 + ez)
    np.clip(out_data, _PROB_FLOOR, 1.0 - _PROB_FLOOR, out=out_data)

    def bw(g):
        a._accum(g * out_data * (1.0 - out_data))

    return Tensor._make(out_data, (a,), "sigmoid", bw)


def softmax(x, axis=1):
    """Numerically stable softmax over the class axis; rows sum to 1."""
    a = Tensor._coerce(x)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)
    np.clip(out_data, _PROB_FLOOR, 1.0 - _PROB_FLOOR, out=out_data)

    def bw(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a._accum((g - dot) * out_data)

    return Tensor._make(out_data, (a,), "softmax", bw)


def activation(x, kind):
    """Dispatch by name: relu | sigmoid | softmax."""
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        return softmax(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def _resolve_padding(padding, kh, kw, stride):
    if padding == "same":
        if stride != 1:
            raise ValueError('"same" padding is only defined for stride 1')
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError('"same" padding requires odd kernel extents')
        return kh // 2
    p = int(padding)
    if p < 0:
        raise ValueError("padding must be >= 0")
    return p


def conv2d(x, w, b=None, stride=1, padding=0):
    """2D cross-correlation of (N,C,H,W) with (F,C,kh,kw) plus bias (F,).

    Output extents follow H' = floor((H + 2p - kh)/stride) + 1.
    """
    x, w = Tensor._coerce(x), Tensor._coerce(w)
    if b is not None:
        b = Tensor._coerce(b)
    n, c, h, wd = x.data.shape
    f, cw, kh, kw = w.data.shape
    if c != cw:
        raise ValueError(f"channel mismatch: input has {c}, weight expects {cw}")
    if b is not None and b.data.shape != (f,):
        raise ValueError(f"bias must have shape ({f},), got {b.data.shape}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    p = _resolve_padding(padding, kh, kw, stride)
    ho = (h + 2 * p - kh) // stride + 1
    wo = (wd + 2 * p - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError(
            f"output extent < 1 for input {h}x{wd}, kernel {kh}x{kw}, "
            f"padding {p}, stride {stride}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    out_data = backends.conv2d_forward(np.ascontiguousarray(xp), w.data, stride)
    if b is not None:
        out_data = out_data + b.data.reshape(1, f, 1, 1)

    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            gxp = backends.conv2d_backward_input(g, w.data, xp.shape, stride)
            x._accum(gxp[:, :, p : p + h, p : p + wd] if p else gxp)
        if w.requires_grad:
            w._accum(backends.conv2d_backward_weight(g, np.ascontiguousarray(xp), kh, kw, stride))
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))

    return Tensor._make(out_data, parents, "conv2d", bw)


def conv2d_transpose(x, w, b=None, kernel_size=2, stride=2):
    """Transposed convolution, the adjoint of a 2x2 stride-2 conv2d.

    Weight layout is (C_in, F_out, 2, 2); spatial extents exactly double.
    Only the 2x2 / stride-2 configuration is supported.
    """
    if kernel_size != 2 or stride != 2:
        raise ValueError("conv2d_transpose supports only kernel 2x2 with stride 2")
    x, w = Tensor._coerce(x), Tensor._coerce(w)
    if b is not None:
        b = Tensor._coerce(b)
    n, c, h, wd = x.data.shape
    cw, f, kh, kw = w.data.shape
    if (kh, kw) != (2, 2):
        raise ValueError(f"weight spatial extents must be 2x2, got {kh}x{kw}")
    if c != cw:
        raise ValueError(f"channel mismatch: input has {c}, weight expects {cw}")

    out_data = backends.upconv2x2_forward(np.ascontiguousarray(x.data), w.data)
    if b is not None:
        out_data = out_data + b.data.reshape(1, f, 1, 1)

    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x._accum(backends.upconv2x2_backward_input(g, w.data))
        if w.requires_grad:
            w._accum(backends.upconv2x2_backward_weight(g, np.ascontiguousarray(x.data)))
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))

    return Tensor._make(out_data, parents, "conv2d_transpose", bw)


def max_pool2d(x, return_indices=False):
    """2x2 stride-2 max pooling; requires even spatial extents.

    With ``return_indices`` the flat row-major position (into H*W) of each
    window maximum comes back too; ties resolve to the first position.
    """
    x = Tensor._coerce(x)
    n, c, h, wd = x.data.shape
    if h % 2 or wd % 2:
        raise ValueError(f"max_pool2d requires even spatial extents, got {h}x{wd}")
    out_data, idx = backends.maxpool2x2_forward(np.ascontiguousarray(x.data))

    def bw(g):
        x._accum(backends.maxpool2x2_backward(np.ascontiguousarray(g), idx, h, wd))

    out = Tensor._make(out_data, (x,), "max_pool2d", bw)
    return (out, idx) if return_indices else out


def global_avg_pool(x):
    """Mean over the spatial extents: (N,C,H,W) -> (N,C)."""
    return Tensor._coerce(x).mean(axis=(2, 3))


def batch_norm(x, gamma, beta, running_mean, running_var, train,
               eps=1e-5, momentum=0.1, update_running=True):
    """Per-channel batch normalization.

    Train mode normalizes with batch statistics over (N,H,W) and, unless
    ``update_running`` is off (frozen layers), updates the running stats in
    place by exponential moving average (unbiased variance); eval mode
    normalizes with the running stats only.
    """
    x = Tensor._coerce(x)
    n, c, h, wd = x.data.shape
    gamma, beta = Tensor._coerce(gamma), Tensor._coerce(beta)
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ValueError(
            f"gamma/beta must have shape ({c},), got {gamma.data.shape} / {beta.data.shape}"
        )
    m = n * h * wd
    if train:
        if m < 2:
            raise ValueError("train-mode batch norm needs N*H*W >= 2 per channel")
        mu = x.mean(axis=(0, 2, 3), keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=(0, 2, 3), keepdims=True)
        xhat = xc / (var + eps).sqrt()
        if update_running:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.data.reshape(c)
            running_var *= 1.0 - momentum
            running_var += momentum * var.data.reshape(c) * (m / (m - 1.0))
    else:
        mu = running_mean.reshape(1, c, 1, 1)
        inv = 1.0 / np.sqrt(running_var.reshape(1, c, 1, 1) + eps)
        xhat = (x - Tensor(mu)) * Tensor(inv)
    return xhat * gamma.reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)


def dense(x, w, b):
    """Affine map (N,D) @ (D,M) + (M,)."""
    return Tensor._coerce(x) @ w + b
