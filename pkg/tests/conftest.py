import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def naive_conv2d(x, w, b=None, stride=1, padding=0):
    """Quadruple-loop cross-correlation oracle, independent of the kernels."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    p = padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    ho = (h + 2 * p - kh) // stride + 1
    wo = (wd + 2 * p - kw) // stride + 1
    out = np.zeros((n, f, ho, wo))
    for b_ in range(n):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[b_, ch, i * stride + u, j * stride + v] * w[fi, ch, u, v]
                    out[b_, fi, i, j] = acc + (b[fi] if b is not None else 0.0)
    return out
