"""Two-stage prediction: classifier gate, conditional segmentation.

An image is first scored by the classifier; when the no-tumor
probability reaches the gate threshold (default 0.99, tie gates out) the
pipeline stops with a no-tumor label and no segmentation work.  Otherwise
the segmenter runs exactly once, its raw sigmoid output is kept as a
per-pixel uncertainty map, and the mask is that map binarized at 0.5.
An all-empty mask downgrades the label back to no-tumor while recording
that the segmenter was consulted.

Both models are always invoked in eval mode regardless of their mode
flag, so concurrent per-image calls can share them read-only.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netpbm import write_pnm
from .tensor import no_grad

BINARIZE_THRESHOLD = 0.5
DEFAULT_GATE = 0.99


@dataclass(frozen=True)
class Prediction:
    case_id: str
    p_tumor: float
    routed: bool
    label: int
    mask: object = None
    uncertainty: object = None
    threshold_used: float = DEFAULT_GATE

    def validate(self):
        if not 0.0 <= self.p_tumor <= 1.0:
            raise ValueError(f"p_tumor out of range: {self.p_tumor}")
        if self.routed != (self.mask is not None):
            raise ValueError("mask must be present exactly when routed")
        if self.routed != (self.uncertainty is not None):
            raise ValueError("uncertainty must be present exactly when routed")
        if self.mask is not None:
            if not np.isin(self.mask, (0, 1)).all():
                raise ValueError("mask must be binary")
            u = np.asarray(self.uncertainty)
            if u.min() < 0.0 or u.max() > 1.0:
                raise ValueError("uncertainty values must lie in [0, 1]")
            if not np.array_equal(self.mask,
                                  (u >= BINARIZE_THRESHOLD).astype(self.mask.dtype)):
                raise ValueError("mask must equal the binarized uncertainty map")
            if self.label != int(self.mask.any()):
                raise ValueError("label must reflect the predicted mask")
        elif self.label != 0:
            raise ValueError("gated-out predictions carry the no-tumor label")
        return self


def _single_batch(image):
    x = np.asarray(image)
    if x.ndim != 3:
        raise ValueError(f"expected a single CHW image, got shape {x.shape}")
    return x[None]


def classify(classifier, image):
    """Tumor-class probability for one CHW image."""
    with no_grad():
        out = classifier.forward(_single_batch(image), train=False)
    return float(out.data[0, 1])


def uncertainty_map(segmenter, image):
    """Raw per-pixel sigmoid output, shaped like the sample mask (1,H,W)."""
    with no_grad():
        out = segmenter.forward(_single_batch(image), train=False)
    return out.data[0]


def route_predict(classifier, segmenter, image, threshold=DEFAULT_GATE,
                  case_id=""):
    """Run the gate, then the segmenter only for non-confident images."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"gate threshold must lie in [0, 1], got {threshold}")
    p_tumor = classify(classifier, image)
    if (1.0 - p_tumor) >= threshold:
        return Prediction(case_id=case_id, p_tumor=p_tumor, routed=False,
                          label=0, threshold_used=threshold)
    u = uncertainty_map(segmenter, image)
    mask = (u >= BINARIZE_THRESHOLD).astype(np.uint8)
    return Prediction(case_id=case_id, p_tumor=p_tumor, routed=True,
                      label=int(mask.any()), mask=mask, uncertainty=u,
                      threshold_used=threshold)


def predict_dataset(classifier, segmenter, dataset, threshold=DEFAULT_GATE):
    """route_predict over every sample, order preserved."""
    return [route_predict(classifier, segmenter, s.image, threshold, s.case_id)
            for s in dataset]


def save_predictions(predictions, out_dir):
    """Write ``predictions.csv`` plus one mask PGM per routed prediction.

    The mask_path column holds the PGM filename relative to ``out_dir``
    (empty for gated-out images); masks are stored as 0/255.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["case_id,p_tumor,routed,label,mask_path"]
    for pred in predictions:
        mask_name = ""
        if pred.mask is not None:
            mask_name = f"{pred.case_id}_mask.pgm"
            plane = pred.mask[0] if pred.mask.ndim == 3 else pred.mask
            write_pnm(out / mask_name, plane.astype(np.uint8) * 255)
        lines.append(f"{pred.case_id},{pred.p_tumor:.6f},{int(pred.routed)},"
                     f"{pred.label},{mask_name}")
    path = out / "predictions.csv"
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
    return path
