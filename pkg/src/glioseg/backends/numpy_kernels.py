"""Pure-numpy kernel implementations.

Convolutions are evaluated as a matmul over sliding-window views; the
backward passes use per-kernel-offset strided slice accumulation (col2im
without materializing columns).  Inputs arrive already zero-padded; shapes
follow the NCHW convention with weights (F, C, kh, kw).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(xp, kh, kw, stride):
    # (N, C, Ho, Wo, kh, kw) view, no copy
    return sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d_forward(xp, w, stride):
    """Cross-correlate padded input (N,C,Hp,Wp) with w (F,C,kh,kw)."""
    F, C, kh, kw = w.shape
    win = _windows(xp, kh, kw, stride)
    n, _, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, C * kh * kw)
    out = cols @ w.reshape(F, C * kh * kw).T
    return np.ascontiguousarray(out.reshape(n, ho, wo, F).transpose(0, 3, 1, 2))


def conv2d_backward_input(go, w, xp_shape, stride):
    """Gradient w.r.t. the padded input; go is (N,F,Ho,Wo)."""
    F, C, kh, kw = w.shape
    _, _, ho, wo = go.shape
    gxp = np.zeros(xp_shape, dtype=go.dtype)
    # One strided slice per kernel offset: offsets never collide within (u, v).
    for u in range(kh):
        for v in range(kw):
            g = np.einsum("nfij,fc->ncij", go, w[:, :, u, v])
            gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += g
    return gxp


def conv2d_backward_weight(go, xp, kh, kw, stride):
    """Gradient w.r.t. the conv weight; xp is the padded forward input."""
    win = _windows(xp, kh, kw, stride)
    return np.einsum("nfij,ncijuv->fcuv", go, win)


def upconv2x2_forward(x, w):
    """Transposed convolution, kernel 2x2 stride 2; w is (C,F,2,2)."""
    n, c, h, wd = x.shape
    f = w.shape[1]
    out = np.empty((n, f, 2 * h, 2 * wd), dtype=x.dtype)
    for u in range(2):
        for v in range(2):
            out[:, :, u::2, v::2] = np.einsum("ncij,cf->nfij", x, w[:, :, u, v])
    return out


def upconv2x2_backward_input(go, w):
    c, f = w.shape[:2]
    n = go.shape[0]
    h, wd = go.shape[2] // 2, go.shape[3] // 2
    gx = np.zeros((n, c, h, wd), dtype=go.dtype)
    for u in range(2):
        for v in range(2):
            gx += np.einsum("nfij,cf->ncij", go[:, :, u::2, v::2], w[:, :, u, v])
    return gx


def upconv2x2_backward_weight(go, x):
    c, f = x.shape[1], go.shape[1]
    gw = np.empty((c, f, 2, 2), dtype=go.dtype)
    for u in range(2):
        for v in range(2):
            gw[:, :, u, v] = np.einsum("ncij,nfij->cf", x, go[:, :, u::2, v::2])
    return gw


def maxpool2x2_forward(x):
    """2x2 stride-2 max pool; ties go to the first window slot in row-major
    order.  Returns (out, idx) with idx holding flat positions into H*W."""
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    # Candidates ordered row-major within each window: (0,0),(0,1),(1,0),(1,1)
    quad = x.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    local = np.argmax(quad, axis=-1)  # first occurrence wins ties
    out = np.take_along_axis(quad, local[..., None], axis=-1)[..., 0]
    ii = 2 * np.arange(ho)[:, None] + (local // 2)
    jj = 2 * np.arange(wo)[None, :] + (local % 2)
    idx = ii * w + jj
    return np.ascontiguousarray(out), np.ascontiguousarray(idx.astype(np.int64))


def maxpool2x2_backward(go, idx, h, w):
    n, c = go.shape[:2]
    gx = np.zeros((n, c, h * w), dtype=go.dtype)
    # Each input position belongs to exactly one window, so plain assignment
    # after flattening is a correct scatter.
    np.put_along_axis(gx, idx.reshape(n, c, -1), go.reshape(n, c, -1), axis=-1)
    return gx.reshape(n, c, h, w)
