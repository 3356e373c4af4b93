"""Datasets: manifest loading, resizing, synthetic lesions, and splits.

A sample couples a [0,1] float image (C, H, W) with a binary mask
(1, H, W) and a label that must agree with the mask: label set if and
only if the mask has foreground.  Datasets enforce unique case ids.

The synthetic generator is the desk-scale stand-in for a real corpus:
textured background, one bright lesion per positive sample with the mask
as its exact support, fully determined by (seed, n, params).
"""

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .netpbm import read_pnm, write_pnm


@dataclass
class Sample:
    case_id: str
    image: np.ndarray
    mask: np.ndarray
    label: int
    modality: str = "FLAIR"

    def validate(self):
        if self.image.ndim != 3 or self.image.shape[0] not in (1, 3):
            raise ValueError(f"{self.case_id}: image must be (1|3, H, W), "
                             f"got {self.image.shape}")
        if self.mask.shape != (1,) + self.image.shape[1:]:
            raise ValueError(f"{self.case_id}: mask shape {self.mask.shape} "
                             f"does not match image {self.image.shape}")
        values = np.unique(self.mask)
        if not np.isin(values, (0.0, 1.0)).all():
            raise ValueError(f"{self.case_id}: mask is not binary")
        has_fg = bool(self.mask.any())
        if has_fg != bool(self.label):
            raise ValueError(
                f"{self.case_id}: label {self.label} contradicts mask "
                f"({'non-empty' if has_fg else 'empty'})")
        return self


@dataclass
class Dataset:
    samples: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def __iter__(self):
        return iter(self.samples)

    def validate(self):
        ids = [s.case_id for s in self.samples]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate case ids in dataset")
        for s in self.samples:
            s.validate()
        return self


def load_dataset(root):
    """Read ``manifest.csv`` under ``root`` and every file it references."""
    root = Path(root)
    manifest = root / "manifest.csv"
    if not manifest.exists():
        raise FileNotFoundError(f"{manifest} not found")
    required = {"case_id", "image_path", "mask_path", "label"}
    samples = []
    with open(manifest, newline="") as f:
        reader = csv.DictReader(f)
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"manifest missing columns: {sorted(missing)}")
        for row in reader:
            case_id = row["case_id"]
            image = read_pnm(root / row["image_path"]).astype(np.float64) / 255.0
            if image.ndim == 2:
                image = image[None]
            else:
                image = image.transpose(2, 0, 1)
            mask_raw = read_pnm(root / row["mask_path"])
            if mask_raw.ndim != 2:
                raise ValueError(f"{case_id}: mask must be grayscale")
            mask = (mask_raw.astype(np.float64) / 255.0 >= 0.5).astype(np.float64)[None]
            label = int(row["label"])
            if label not in (0, 1):
                raise ValueError(f"{case_id}: label must be 0 or 1, got {row['label']!r}")
            samples.append(Sample(case_id, image, mask, label).validate())
    return Dataset(samples, {"source": "real", "root": str(root)}).validate()


def save_dataset(dataset, root):
    """Write the load_dataset layout: one PGM/PPM pair per case plus
    ``manifest.csv``.  Images quantize to 8 bits; masks round-trip exactly."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = ["case_id,image_path,mask_path,label"]
    for s in dataset:
        image_name = f"{s.case_id}_img." + ("pgm" if s.image.shape[0] == 1 else "ppm")
        mask_name = f"{s.case_id}_mask.pgm"
        img_u8 = np.clip(np.round(s.image * 255.0), 0, 255).astype(np.uint8)
        write_pnm(root / image_name,
                  img_u8[0] if s.image.shape[0] == 1 else img_u8.transpose(1, 2, 0))
        write_pnm(root / mask_name, (s.mask[0] * 255).astype(np.uint8))
        lines.append(f"{s.case_id},{image_name},{mask_name},{s.label}")
    with open(root / "manifest.csv", "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
    return root / "manifest.csv"


def _bilinear(img, target_h, target_w):
    c, h, w = img.shape
    ys = (np.arange(target_h) + 0.5) * h / target_h - 0.5
    xs = (np.arange(target_w) + 0.5) * w / target_w - 0.5
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    fy = ys - y0f
    fx = xs - x0f
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)
    wy = fy[:, None]
    wx = fx[None, :]
    top = img[:, y0[:, None], x0[None, :]] * (1 - wx) + img[:, y0[:, None], x1[None, :]] * wx
    bot = img[:, y1[:, None], x0[None, :]] * (1 - wx) + img[:, y1[:, None], x1[None, :]] * wx
    return top * (1 - wy) + bot * wy


def _nearest(img, target_h, target_w):
    c, h, w = img.shape
    ys = np.minimum(((np.arange(target_h) + 0.5) * h / target_h).astype(np.int64), h - 1)
    xs = np.minimum(((np.arange(target_w) + 0.5) * w / target_w).astype(np.int64), w - 1)
    return img[:, ys[:, None], xs[None, :]]


def normalize_resize(image, target_size, kind="image"):
    """Resample to ``target_size`` and map intensities into [0,1].

    Images are resampled bilinearly (half-pixel centers) and then min-max
    normalized per image; a zero-range image maps to all zeros.  Masks are
    resampled nearest-neighbor and re-binarized, never normalized.
    """
    th, tw = target_size
    if th < 8 or tw < 8:
        raise ValueError(f"target size must be at least 8x8, got {th}x{tw}")
    img = np.asarray(image, dtype=np.float64)
    if kind == "mask":
        out = _nearest(img, th, tw)
        return (out >= 0.5).astype(np.float64)
    if kind != "image":
        raise ValueError(f"kind must be image or mask, got {kind!r}")
    out = _bilinear(img, th, tw)
    lo = out.min()
    span = out.max() - lo
    if span == 0.0:
        return np.zeros_like(out)
    return (out - lo) / span


def resize_dataset(dataset, target_size):
    """Resize every sample; labels are recomputed from the resized masks."""
    samples = []
    for s in dataset:
        image = normalize_resize(s.image, target_size)
        mask = normalize_resize(s.mask, target_size, kind="mask")
        samples.append(Sample(s.case_id, image, mask, int(mask.any()),
                              s.modality).validate())
    meta = dict(dataset.meta, resized_to=tuple(target_size))
    return Dataset(samples, meta)


@dataclass(frozen=True)
class SynthParams:
    image_size: tuple = (64, 64)
    tumor_probability: float = 0.7
    shape_family: str = "ellipse"
    contrast: float = 0.45
    noise: float = 0.04


def _lesion_mask(rng, h, w, family):
    """One bright-lesion support region; redrawn if degenerate (< 9 px)."""
    yy, xx = np.mgrid[0:h, 0:w]
    while True:
        cy = rng.uniform(0.3, 0.7) * h
        cx = rng.uniform(0.3, 0.7) * w
        a = rng.uniform(0.10, 0.22) * w
        b = rng.uniform(0.10, 0.22) * h
        phi = rng.uniform(0.0, np.pi)
        dy = yy - cy
        dx = xx - cx
        u = dx * np.cos(phi) + dy * np.sin(phi)
        v = -dx * np.sin(phi) + dy * np.cos(phi)
        if family == "ellipse":
            inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        elif family == "rectangle":
            inside = (np.abs(u) <= a) & (np.abs(v) <= b)
        elif family == "blob":
            theta = np.arctan2(v, u)
            radius = np.hypot(u / a, v / b)
            wobble = 1.0
            for k in (2, 3, 5):
                wobble = wobble + rng.uniform(-0.15, 0.15) * np.cos(
                    k * theta + rng.uniform(0, 2 * np.pi))
            inside = radius <= wobble
        else:
            raise ValueError(f"unknown shape family {family!r}")
        if inside.sum() >= 9:
            return inside.astype(np.float64)


def synth_dataset(seed, n, params=SynthParams()):
    """Deterministic synthetic corpus: same arguments, same bytes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= params.tumor_probability <= 1.0:
        raise ValueError("tumor probability must lie in [0,1]")
    h, w = params.image_size
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        coarse = rng.uniform(0.15, 0.55, size=(1, 6, 6))
        background = _bilinear(coarse, h, w)[0]
        positive = rng.random() < params.tumor_probability
        if positive:
            mask = _lesion_mask(rng, h, w, params.shape_family)
        else:
            mask = np.zeros((h, w))
        image = background + params.contrast * mask
        image = image + rng.normal(0.0, params.noise, size=(h, w))
        image = np.clip(image, 0.0, 1.0)
        samples.append(Sample(f"synth-{seed}-{i:04d}", image[None], mask[None],
                              int(positive)))
    meta = {"source": "synthetic", "seed": seed, "n": n, "params": asdict(params)}
    return Dataset(samples, meta).validate()


def split(dataset, ratios, seed):
    """Seeded shuffle, then largest-remainder share sizes."""
    ratios = tuple(float(r) for r in ratios)
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(dataset)
    exact = [n * r for r in ratios]
    sizes = [int(s) for s in exact]
    remainders = sorted(range(len(ratios)),
                        key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in remainders[:n - sum(sizes)]:
        sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise ValueError(f"split sizes {sizes} include an empty part for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    parts = []
    start = 0
    for k, size in enumerate(sizes):
        chosen = [dataset.samples[j] for j in order[start:start + size]]
        parts.append(Dataset(chosen, dict(dataset.meta, split_part=k,
                                          split_seed=seed)))
        start += size
    return tuple(parts)
