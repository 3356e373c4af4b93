"""Binary netpbm images: P5 (grayscale) and P6 (RGB), maxval 255.

The formats are dependency-free and bit-exact, which is what the tests
need; conversion from anything richer is a documented pre-step.
"""

import numpy as np


def _next_token(f):
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise ValueError("truncated netpbm header")
        if ch == b"#":
            while ch and ch != b"\n":
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def read_pnm(path):
    """Read a binary PGM or PPM.

    Returns uint8 arrays: (H, W) for grayscale, (H, W, 3) for color.
    """
    with open(path, "rb") as f:
        magic = _next_token(f)
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"{path}: unsupported netpbm magic {magic!r}")
        width = int(_next_token(f))
        height = int(_next_token(f))
        maxval = int(_next_token(f))
        if maxval != 255:
            raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
        channels = 1 if magic == b"P5" else 3
        raster = f.read(width * height * channels)
    if len(raster) != width * height * channels:
        raise ValueError(f"{path}: truncated raster")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def write_pnm(path, array):
    """Write a uint8 array as binary PGM (2-D) or PPM (H, W, 3)."""
    arr = np.ascontiguousarray(array)
    if arr.dtype != np.uint8:
        raise ValueError(f"netpbm raster must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        magic = b"P5"
        h, w = arr.shape
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
        h, w = arr.shape[:2]
    else:
        raise ValueError(f"cannot map shape {arr.shape} onto PGM/PPM")
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(arr.tobytes())
