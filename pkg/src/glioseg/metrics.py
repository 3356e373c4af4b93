"""Classification/segmentation metrics, history CSV, overlays, evaluation.

Counting conventions:

* undefined ratios (zero denominator) come back as 0.0 with the affected
  statistic named in ``undefined``
* a pair of empty masks scores dice = iou = 1: the image has no lesion
  and the prediction agrees; callers can exclude such pairs via the flag
"""

from dataclasses import dataclass

import numpy as np

from . import losses


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassScores:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple


def classification_scores(predicted, true):
    """Binary scores with the tumor class as positive."""
    p = np.asarray(predicted).ravel()
    t = np.asarray(true).ravel()
    if p.size == 0:
        raise ValueError("no items to score")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    for arr, which in ((p, "predicted"), (t, "true")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{which} labels must be 0/1")
    p = p.astype(bool)
    t = t.astype(bool)
    counts = ConfusionCounts(
        tp=int((p & t).sum()), fp=int((p & ~t).sum()),
        fn=int((~p & t).sum()), tn=int((~p & ~t).sum()))
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    accuracy = (counts.tp + counts.tn) / counts.total
    precision = ratio(counts.tp, counts.tp + counts.fp, "precision")
    recall = ratio(counts.tp, counts.tp + counts.fn, "recall")
    f1 = ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn, "f1")
    return ClassScores(counts, accuracy, precision, recall, f1,
                       tuple(undefined))


def dice_iou(mask_a, mask_b):
    """(dice, iou) of two binary masks; both empty scores (1.0, 1.0)."""
    a = np.asarray(mask_a)
    b = np.asarray(mask_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    for arr in (a, b):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("masks must be binary")
    a = a.astype(bool)
    b = b.astype(bool)
    inter = int((a & b).sum())
    union = int((a | b).sum())
    total = int(a.sum()) + int(b.sum())
    if union == 0:
        return 1.0, 1.0
    return 2.0 * inter / total, inter / union


def mean_dice(prob_maps, masks, threshold=0.5):
    """Mean per-image dice of thresholded probability maps; the History
    notion of segmenter accuracy."""
    total = 0.0
    for prob, mask in zip(prob_maps, masks):
        d, _ = dice_iou(prob >= threshold, mask)
        total += d
    return total / len(masks)


def history_csv(history, path):
    """Serialize a History to the fixed 6-decimal CSV schema."""
    if not history.rows:
        raise ValueError("history has no rows")
    lines = ["epoch,train_acc,val_acc,train_loss,val_loss,seconds"]
    for row in history.rows:
        lines.append(f"{row.epoch},{row.train_acc:.6f},{row.val_acc:.6f},"
                     f"{row.train_loss:.6f},{row.val_loss:.6f},{row.seconds:.6f}")
    payload = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as f:
        f.write(payload)
    return path


def contour(mask):
    """Foreground pixels having at least one background 4-neighbor."""
    m = np.asarray(mask).astype(bool)
    if m.ndim == 3:
        m = m[0]
    padded = np.pad(m, 1)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return m & ~interior


def _to_gray_u8(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=0)
    return np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)


def overlay_render(image, gt_mask, pred_mask, path):
    """Five panels left to right: image, ground-truth mask, predicted
    mask, image with green ground-truth contour, image with red predicted
    contour; 1-px mid-gray separators."""
    from .netpbm import write_pnm

    gray = _to_gray_u8(image)
    gt = np.asarray(gt_mask).astype(bool)
    pred = np.asarray(pred_mask).astype(bool)
    if gt.ndim == 3:
        gt = gt[0]
    if pred.ndim == 3:
        pred = pred[0]
    if gt.shape != gray.shape or pred.shape != gray.shape:
        raise ValueError(
            f"shape mismatch: image {gray.shape}, gt {gt.shape}, pred {pred.shape}")

    def rgb(gray2d):
        return np.repeat(gray2d[:, :, None], 3, axis=2)

    def with_contour(base, mask, color):
        panel = rgb(base).copy()
        panel[contour(mask)] = color
        return panel

    panels = [
        rgb(gray),
        rgb(gt.astype(np.uint8) * 255),
        rgb(pred.astype(np.uint8) * 255),
        with_contour(gray, gt, (0, 255, 0)),
        with_contour(gray, pred, (255, 0, 0)),
    ]
    h = gray.shape[0]
    sep = np.full((h, 1, 3), 128, dtype=np.uint8)
    strip = panels[0]
    for panel in panels[1:]:
        strip = np.concatenate([strip, sep, panel], axis=1)
    write_pnm(path, strip)
    return path


@dataclass
class EvalReport:
    rows: list

    COLUMNS = ("model", "head", "items", "accuracy", "loss", "mean_dice",
               "mean_iou", "f1", "both_empty", "params_total",
               "params_trainable", "params_non_trainable")

    def to_csv(self, path):
        lines = [",".join(self.COLUMNS)]
        for row in self.rows:
            cells = []
            for col in self.COLUMNS:
                value = row[col]
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append(f"{value:.6f}")
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        with open(path, "w", newline="") as f:
            f.write("\n".join(lines) + "\n")
        return path


def evaluate(model_list, dataset, batch_size=8):
    """Score every model on the dataset; one report row per model.

    Classifiers get accuracy / bce loss / label F1; segmenters get mean
    per-image dice and iou, mean pixel F1 (equal to dice per pair), dice
    accuracy at 0.5, and bce+dice loss.  Audit columns come from
    param_count.
    """
    from .tensor import no_grad

    rows = []
    for model in model_list:
        model.eval()
        audit = model.param_audit()
        images = [s.image for s in dataset]
        masks = [s.mask for s in dataset]
        labels = [s.label for s in dataset]
        outputs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                xb = np.stack(images[start:start + batch_size])
                outputs.append(model.forward(xb).data)
        out = np.concatenate(outputs)
        if model.head == "classifier":
            predicted = out.argmax(axis=1)
            scores = classification_scores(predicted, labels)
            loss = float(losses.bce_loss(out[:, 1], np.asarray(labels, dtype=float)).data)
            row = {"model": model.name, "head": "classifier",
                   "items": len(dataset), "accuracy": scores.accuracy,
                   "loss": loss, "mean_dice": None, "mean_iou": None,
                   "f1": scores.f1, "both_empty": None}
        else:
            target = np.stack(masks)
            loss = float(losses.combined_loss(out, target, "bce+dice").data)
            dices = []
            ious = []
            both_empty = 0
            for prob, mask in zip(out, target):
                pred = prob >= 0.5
                if not pred.any() and not mask.any():
                    both_empty += 1
                d, i = dice_iou(pred, mask)
                dices.append(d)
                ious.append(i)
            row = {"model": model.name, "head": "segmenter",
                   "items": len(dataset),
                   "accuracy": float(np.mean(dices)),
                   "loss": loss,
                   "mean_dice": float(np.mean(dices)),
                   "mean_iou": float(np.mean(ious)),
                   "f1": float(np.mean(dices)),
                   "both_empty": both_empty}
        row.update({"params_total": audit.total,
                    "params_trainable": audit.trainable,
                    "params_non_trainable": audit.non_trainable})
        rows.append(row)
    return EvalReport(rows)
