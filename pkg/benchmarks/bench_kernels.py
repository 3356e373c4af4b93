"""Timing comparison of the numba and numpy kernel backends.

Runs every hot kernel on representative shapes, checks that the two
backends agree to tight tolerance on identical inputs, and prints the
median runtimes with the speedup ratio.  Invoke as a script:

    python benchmarks/bench_kernels.py [--repeats N] [--batch N] [--size N]
"""

import argparse
import statistics
import time

import numpy as np

from glioseg.backends import available_backends, get_backend


def _pad(x, p):
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _cases(batch, size, rng):
    """(name, call-args factory) for each kernel at two channel scales."""
    cases = []
    for c, f, edge in ((16, 32, size), (64, 64, max(8, size // 4))):
        tag = f"N{batch} C{c} F{f} {edge}x{edge}"
        x = rng.standard_normal((batch, c, edge, edge))
        w = rng.standard_normal((f, c, 3, 3))
        xp = _pad(x, 1)
        go = rng.standard_normal((batch, f, edge, edge))
        cases.append((f"conv2d_forward   {tag}",
                      "conv2d_forward", (xp, w, 1)))
        cases.append((f"conv2d_bwd_input {tag}",
                      "conv2d_backward_input", (go, w, xp.shape, 1)))
        cases.append((f"conv2d_bwd_weight {tag}",
                      "conv2d_backward_weight", (go, xp, 3, 3, 1)))
        uw = rng.standard_normal((c, f, 2, 2))
        ugo = rng.standard_normal((batch, f, 2 * edge, 2 * edge))
        cases.append((f"upconv_forward   {tag}",
                      "upconv2x2_forward", (x, uw)))
        cases.append((f"upconv_bwd_input {tag}",
                      "upconv2x2_backward_input", (ugo, uw)))
        cases.append((f"upconv_bwd_weight {tag}",
                      "upconv2x2_backward_weight", (ugo, x)))
        cases.append((f"maxpool_forward  {tag}",
                      "maxpool2x2_forward", (x,)))
        pgo = rng.standard_normal((batch, c, edge // 2, edge // 2))
        cases.append((f"maxpool_backward {tag}",
                      "maxpool2x2_backward", (x, pgo)))
    return cases


def _time(fn, args, repeats):
    fn(*args)  # warm-up (includes any JIT compilation)
    samples = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - started)
    return statistics.median(samples)


def _agreement(a, b):
    a = a[0] if isinstance(a, tuple) else a
    b = b[0] if isinstance(b, tuple) else b
    scale = max(np.abs(a).max(), 1.0)
    return np.abs(a - b).max() / scale


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--size", type=int, default=64)
    args = parser.parse_args(argv)

    backends = available_backends()
    if len(backends) < 2:
        print("numba not importable; nothing to compare")
        return 1
    numba_backend = get_backend("numba")
    numpy_backend = get_backend("numpy")

    rng = np.random.default_rng(0)
    header = f"{'kernel / shape':<44} {'numba':>10} {'numpy':>10} {'speedup':>8}  parity"
    print(header)
    print("-" * len(header))
    worst = 0.0
    for label, kernel, call_args in _cases(args.batch, args.size, rng):
        nb_fn = getattr(numba_backend, kernel)
        np_fn = getattr(numpy_backend, kernel)
        nb_args = np_args = call_args
        if kernel == "maxpool2x2_backward":
            # the scatter consumes the indices its own forward produced
            x_in, pgo = call_args
            h, w = x_in.shape[2:]
            nb_args = (pgo, numba_backend.maxpool2x2_forward(x_in)[1], h, w)
            np_args = (pgo, numpy_backend.maxpool2x2_forward(x_in)[1], h, w)
        gap = _agreement(nb_fn(*nb_args), np_fn(*np_args))
        worst = max(worst, gap)
        t_nb = _time(nb_fn, nb_args, args.repeats)
        t_np = _time(np_fn, np_args, args.repeats)
        print(f"{label:<44} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>7.2f}x  {gap:.1e}")
    print(f"\nworst relative disagreement: {worst:.2e} (bound 1e-10)")
    return 0 if worst <= 1e-10 else 1


if __name__ == "__main__":
    raise SystemExit(main())
