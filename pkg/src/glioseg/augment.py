"""Label-consistent augmentation.

Geometric transforms (flips) hit image and mask identically; intensity
jitter touches the image only and never the label.  ``augment`` draws
from its rng in a fixed order (hflip coin, vflip coin, scale, shift),
which is what makes training runs replayable.
"""

from dataclasses import dataclass

import numpy as np

from .data import Sample


@dataclass(frozen=True)
class AugmentPolicy:
    hflip: bool = True
    vflip: bool = True
    intensity_scale: tuple = (0.9, 1.1)
    intensity_shift: tuple = (-0.05, 0.05)

    @classmethod
    def named(cls, name):
        if name == "none":
            return None
        if name == "flips":
            return cls(intensity_scale=(1.0, 1.0), intensity_shift=(0.0, 0.0))
        if name == "full":
            return cls()
        raise ValueError(f"unknown augmentation policy {name!r}")


def hflip(sample):
    return Sample(sample.case_id, sample.image[:, :, ::-1].copy(),
                  sample.mask[:, :, ::-1].copy(), sample.label, sample.modality)


def vflip(sample):
    return Sample(sample.case_id, sample.image[:, ::-1, :].copy(),
                  sample.mask[:, ::-1, :].copy(), sample.label, sample.modality)


def intensity_jitter(sample, scale, shift):
    image = np.clip(sample.image * scale + shift, 0.0, 1.0)
    return Sample(sample.case_id, image, sample.mask, sample.label,
                  sample.modality)


def augment(sample, rng, policy):
    """Apply one random draw of the policy; ``policy=None`` is identity."""
    if policy is None:
        return sample
    out = sample
    if policy.hflip and rng.random() < 0.5:
        out = hflip(out)
    if policy.vflip and rng.random() < 0.5:
        out = vflip(out)
    lo, hi = policy.intensity_scale
    slo, shi = policy.intensity_shift
    if (lo, hi) != (1.0, 1.0) or (slo, shi) != (0.0, 0.0):
        out = intensity_jitter(out, rng.uniform(lo, hi), rng.uniform(slo, shi))
    return out
