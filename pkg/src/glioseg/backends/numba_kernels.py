"""Numba kernel implementations.

Patch extraction / scatter loops are ``@njit`` compiled; the dense
contraction itself goes through ``np.dot`` so BLAS does the arithmetic.
Loop and accumulation order is fixed, so results are reproducible
bit-for-bit run to run.  Same calling contract as ``numpy_kernels``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _im2col(xp, kh, kw, stride):
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = np.empty((n * ho * wo, c * kh * kw), dtype=xp.dtype)
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                k = 0
                for ch in range(c):
                    for u in range(kh):
                        ii = i * stride + u
                        jj = j * stride
                        for v in range(kw):
                            cols[r, k] = xp[b, ch, ii, jj + v]
                            k += 1
    return cols


@njit(cache=True)
def _col2im(gcols, xp_shape, kh, kw, stride):
    n, c, hp, wp = xp_shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    gxp = np.zeros((n, c, hp, wp), dtype=gcols.dtype)
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                k = 0
                for ch in range(c):
                    for u in range(kh):
                        ii = i * stride + u
                        jj = j * stride
                        for v in range(kw):
                            gxp[b, ch, ii, jj + v] += gcols[r, k]
                            k += 1
    return gxp


@njit(cache=True)
def _weight_matrix(w):
    # (F, C, kh, kw) -> contiguous (C*kh*kw, F)
    f, c, kh, kw = w.shape
    wmat = np.empty((c * kh * kw, f), dtype=w.dtype)
    for fi in range(f):
        k = 0
        for ch in range(c):
            for u in range(kh):
                for v in range(kw):
                    wmat[k, fi] = w[fi, ch, u, v]
                    k += 1
    return wmat


@njit(cache=True)
def conv2d_forward(xp, w, stride):
    n = xp.shape[0]
    f, c, kh, kw = w.shape
    ho = (xp.shape[2] - kh) // stride + 1
    wo = (xp.shape[3] - kw) // stride + 1
    cols = _im2col(xp, kh, kw, stride)
    flat = np.dot(cols, _weight_matrix(w))  # (N*Ho*Wo, F)
    out = np.empty((n, f, ho, wo), dtype=xp.dtype)
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                for fi in range(f):
                    out[b, fi, i, j] = flat[r, fi]
    return out


@njit(cache=True)
def _grad_out_matrix(go):
    n, f, ho, wo = go.shape
    gmat = np.empty((n * ho * wo, f), dtype=go.dtype)
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                for fi in range(f):
                    gmat[r, fi] = go[b, fi, i, j]
    return gmat


@njit(cache=True)
def conv2d_backward_input(go, w, xp_shape, stride):
    f, c, kh, kw = w.shape
    gcols = np.dot(_grad_out_matrix(go), _weight_matrix(w).T.copy())
    return _col2im(gcols, xp_shape, kh, kw, stride)


@njit(cache=True)
def conv2d_backward_weight(go, xp, kh, kw, stride):
    f = go.shape[1]
    c = xp.shape[1]
    cols = _im2col(xp, kh, kw, stride)
    gw_mat = np.dot(cols.T.copy(), _grad_out_matrix(go))  # (C*kh*kw, F)
    gw = np.empty((f, c, kh, kw), dtype=go.dtype)
    for fi in range(f):
        k = 0
        for ch in range(c):
            for u in range(kh):
                for v in range(kw):
                    gw[fi, ch, u, v] = gw_mat[k, fi]
                    k += 1
    return gw


@njit(cache=True)
def upconv2x2_forward(x, w):
    n, c, h, wd = x.shape
    f = w.shape[1]
    out = np.zeros((n, f, 2 * h, 2 * wd), dtype=x.dtype)
    for b in range(n):
        for fi in range(f):
            for ch in range(c):
                for u in range(2):
                    for v in range(2):
                        wv = w[ch, fi, u, v]
                        for i in range(h):
                            for j in range(wd):
                                out[b, fi, 2 * i + u, 2 * j + v] += x[b, ch, i, j] * wv
    return out


@njit(cache=True)
def upconv2x2_backward_input(go, w):
    n = go.shape[0]
    c, f = w.shape[:2]
    h, wd = go.shape[2] // 2, go.shape[3] // 2
    gx = np.zeros((n, c, h, wd), dtype=go.dtype)
    for b in range(n):
        for ch in range(c):
            for fi in range(f):
                for u in range(2):
                    for v in range(2):
                        wv = w[ch, fi, u, v]
                        for i in range(h):
                            for j in range(wd):
                                gx[b, ch, i, j] += go[b, fi, 2 * i + u, 2 * j + v] * wv
    return gx


@njit(cache=True)
def upconv2x2_backward_weight(go, x):
    n, c, h, wd = x.shape
    f = go.shape[1]
    gw = np.zeros((c, f, 2, 2), dtype=go.dtype)
    for ch in range(c):
        for fi in range(f):
            for u in range(2):
                for v in range(2):
                    acc = 0.0
                    for b in range(n):
                        for i in range(h):
                            for j in range(wd):
                                acc += x[b, ch, i, j] * go[b, fi, 2 * i + u, 2 * j + v]
                    gw[ch, fi, u, v] = acc
    return gw


@njit(cache=True)
def maxpool2x2_forward(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    out = np.empty((n, c, ho, wo), dtype=x.dtype)
    idx = np.empty((n, c, ho, wo), dtype=np.int64)
    for b in range(n):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    bi, bj = 2 * i, 2 * j
                    best = x[b, ch, bi, bj]
                    best_i, best_j = bi, bj
                    # row-major scan; strict > keeps the first maximum on ties
                    for u in range(2):
                        for v in range(2):
                            val = x[b, ch, bi + u, bj + v]
                            if val > best:
                                best = val
                                best_i, best_j = bi + u, bj + v
                    out[b, ch, i, j] = best
                    idx[b, ch, i, j] = best_i * w + best_j
    return out, idx


@njit(cache=True)
def maxpool2x2_backward(go, idx, h, w):
    n, c, ho, wo = go.shape
    gx = np.zeros((n, c, h, w), dtype=go.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    flat = idx[b, ch, i, j]
                    gx[b, ch, flat // w, flat % w] += go[b, ch, i, j]
    return gx
