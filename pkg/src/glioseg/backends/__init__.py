"""Kernel backend selection.

The convolution / pooling / up-convolution inner loops dominate runtime, so
they exist twice: a numba ``@njit`` implementation and a pure-numpy fallback
built on ``sliding_window_view`` and BLAS matmul.  Both produce the same
values up to float rounding and each is deterministic run-to-run.

The active backend is chosen once at import from the ``GLIOSEG_BACKEND``
environment variable: ``numba``, ``numpy``, or ``auto`` (default; numba when
importable).  ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import numpy_kernels

try:
    from . import numba_kernels

    _HAVE_NUMBA = True
except ImportError:
    numba_kernels = None
    _HAVE_NUMBA = False

_KERNEL_NAMES = [
    "conv2d_forward",
    "conv2d_backward_input",
    "conv2d_backward_weight",
    "upconv2x2_forward",
    "upconv2x2_backward_input",
    "upconv2x2_backward_weight",
    "maxpool2x2_forward",
    "maxpool2x2_backward",
]


def available_backends():
    """Names of importable backends, preferred first."""
    return (["numba"] if _HAVE_NUMBA else []) + ["numpy"]


def get_backend(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name == "numpy":
        return numpy_kernels
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return numba_kernels
    raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")


def _select():
    requested = os.environ.get("GLIOSEG_BACKEND", "auto").lower().strip()
    if requested in ("", "auto"):
        return "numba" if _HAVE_NUMBA else "numpy"
    if requested in ("numba", "numpy"):
        return requested
    raise ValueError(
        f"GLIOSEG_BACKEND={requested!r} not understood; use 'numba', 'numpy' or 'auto'"
    )


_ACTIVE_NAME = _select()
_ACTIVE = get_backend(_ACTIVE_NAME)


def backend_name():
    """Name of the backend the package was imported with."""
    return _ACTIVE_NAME


conv2d_forward = _ACTIVE.conv2d_forward
conv2d_backward_input = _ACTIVE.conv2d_backward_input
conv2d_backward_weight = _ACTIVE.conv2d_backward_weight
upconv2x2_forward = _ACTIVE.upconv2x2_forward
upconv2x2_backward_input = _ACTIVE.upconv2x2_backward_input
upconv2x2_backward_weight = _ACTIVE.upconv2x2_backward_weight
maxpool2x2_forward = _ACTIVE.maxpool2x2_forward
maxpool2x2_backward = _ACTIVE.maxpool2x2_backward
