"""Finite-difference verification of analytic gradients."""

import numpy as np


def grad_check(fn, params, eps=1e-5, max_elements=None, rng=None, atol=0.0):
    """Compare backprop gradients of ``fn`` against central differences.

    ``fn`` is a zero-argument callable returning a scalar ``Tensor`` and must
    be pure in value (re-evaluation gives the same number).  ``params`` are
    the leaf tensors to perturb (an iterable or a name-keyed mapping).
    Returns the maximum over all checked elements of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)``.

    ``max_elements`` caps the number of perturbed elements per parameter
    (seeded subsampling for large models); by default every element is
    checked.  ``atol`` skips elements where both gradients are below it:
    a parameter with a truly zero gradient (a conv bias cancelled by the
    following batch norm, say) leaves only rounding noise in the numeric
    estimate, and a relative comparison of two zeros is meaningless.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    params = list(params.values()) if isinstance(params, dict) else list(params)
    for p in params:
        p.zero_grad()
    out = fn()
    if not np.isfinite(out.data).all():
        raise FloatingPointError("non-finite function value at the base point")
    out.backward()
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
    ]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.flat
        n = p.data.size
        if max_elements is not None and n > max_elements:
            indices = np.sort(rng.choice(n, size=max_elements, replace=False))
        else:
            indices = range(n)
        for i in indices:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().data)
            flat[i] = orig - eps
            f_minus = float(fn().data)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError(
                    f"non-finite function value at perturbed element {i}"
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = ana.flat[i]
            if max(abs(a), abs(numeric)) < atol:
                continue
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            worst = max(worst, err)
    return worst
