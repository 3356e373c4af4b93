"""GSW1 weight archives: a flat, checksummed binary parameter store.

Layout, all integers little-endian:

    magic    4 bytes  b"GSW1"
    version  u16      1
    count    u32      number of entries
    entry    repeated count times:
        name_len u16, name UTF-8,
        ndim u8, dims u32 each,
        values float64 raw (C order)
    checksum u64      blake2b-64 digest of every preceding byte

Values are always stored as 64-bit floats regardless of the model's
precision mode, so a float64 round-trip is bit-exact and a float32 model
round-trips through the exact float64 embedding.

Loading is atomic: the archive is fully parsed and validated against the
model before any tensor is touched.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"GSW1"
VERSION = 1


class ArchiveError(ValueError):
    pass


@dataclass(frozen=True)
class LoadReport:
    loaded: tuple
    skipped: tuple   # model entries absent from the archive
    unused: tuple    # archive entries absent from the model


def _named_dicts(model):
    """Accept either a ModelGraph (dict methods) or a bare Layer (generators)."""
    params = dict(model.named_params())
    states = dict(model.named_state())
    return params, states


def _model_entries(model):
    params, states = _named_dicts(model)
    arrays = {name: p.data for name, p in params.items()}
    for name, state in states.items():
        if name in arrays:
            raise ArchiveError(f"parameter/state name collision: {name}")
        arrays[name] = state
    return arrays


def save_weights(model, path, names=None):
    """Write parameters and running statistics of ``model``.

    ``names`` restricts the archive to the given entry names (an encoder
    prefix subset, say); default is everything.
    """
    arrays = _model_entries(model)
    if names is not None:
        wanted = set(names)
        unknown = wanted - set(arrays)
        if unknown:
            raise ArchiveError(f"cannot save unknown entries: {sorted(unknown)[:5]}")
        arrays = {n: a for n, a in arrays.items() if n in wanted}
    digest = hashlib.blake2b(digest_size=8)
    with open(path, "wb") as f:
        def emit(chunk):
            digest.update(chunk)
            f.write(chunk)

        emit(MAGIC)
        emit(struct.pack("<HI", VERSION, len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode("utf-8")
            emit(struct.pack("<H", len(encoded)))
            emit(encoded)
            emit(struct.pack("<B", arr.ndim))
            emit(struct.pack(f"<{arr.ndim}I", *arr.shape))
            emit(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        f.write(digest.digest())
    return path


def read_archive(path):
    """Parse and checksum-verify an archive into an ordered name->array dict."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 6 + 8:
        raise ArchiveError(f"{path}: too short to be a weights archive")
    body, stored = blob[:-8], blob[-8:]
    if body[:4] != MAGIC:
        raise ArchiveError(f"{path}: bad magic {body[:4]!r}")
    version, count = struct.unpack_from("<HI", body, 4)
    if version != VERSION:
        raise ArchiveError(f"{path}: unsupported version {version}")
    if hashlib.blake2b(body, digest_size=8).digest() != stored:
        raise ArchiveError(f"{path}: checksum mismatch (corrupt archive)")
    arrays = {}
    offset = 10
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", body, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", body, offset)
        offset += 4 * ndim
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        values = np.frombuffer(body, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        if name in arrays:
            raise ArchiveError(f"{path}: duplicate entry {name!r}")
        arrays[name] = values.reshape(shape).copy()
    if offset != len(body):
        raise ArchiveError(f"{path}: {len(body) - offset} trailing bytes")
    return arrays


def load_weights(model, path, mode="strict"):
    """Fill ``model`` tensors from an archive.

    strict: archive and model must hold exactly the same names and shapes.
    by-name: the intersection is loaded; the report lists what was loaded,
    which model entries were skipped, and which archive entries went unused.
    """
    if mode not in ("strict", "by-name"):
        raise ValueError(f"mode must be strict or by-name, got {mode!r}")
    archive = read_archive(path)
    targets = _model_entries(model)

    common = [n for n in targets if n in archive]
    for name in common:
        if targets[name].shape != archive[name].shape:
            raise ArchiveError(
                f"{path}: shape mismatch for {name}: archive "
                f"{archive[name].shape} vs model {targets[name].shape}")
    if mode == "strict":
        missing = [n for n in targets if n not in archive]
        extra = [n for n in archive if n not in targets]
        if missing or extra:
            raise ArchiveError(
                f"{path}: strict load mismatch; missing from archive: "
                f"{missing[:5]}, not in model: {extra[:5]}")

    # validation done; mutate only now
    params, states = _named_dicts(model)
    for name in common:
        values = archive[name]
        if name in params:
            params[name].data = values.astype(params[name].data.dtype)
        else:
            states[name][...] = values.astype(states[name].dtype)
    return LoadReport(tuple(common),
                      tuple(n for n in targets if n not in archive),
                      tuple(n for n in archive if n not in targets))
