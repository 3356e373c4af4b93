"""The epoch loop: seeded shuffling, batch-size growth, history capture.

Accuracy means different things per head and History metadata records
which: classifiers log the fraction of correct argmax labels, segmenters
log mean per-image dice of the 0.5-thresholded map.  Training-side
numbers are accumulated over the training batches as the epoch runs
(so they reflect the moving weights); validation numbers come from a
full eval-mode pass after the epoch.

The wall-clock column defaults to 0.0 so that identical runs serialize
to identical bytes; opt into real timings with ``record_time``.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import losses, metrics
from .augment import AugmentPolicy, augment
from .optim import make_optimizer
from .tensor import Tensor, no_grad


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    base_batch_size: int = 8
    batch_growth_epoch: int = 15
    batch_growth_factor: float = 2.0
    loss: str = "auto"
    augment_policy: Optional[AugmentPolicy] = None
    seed: int = 0
    precision: str = "float64"
    record_time: bool = False

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.base_batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.batch_growth_factor <= 0:
            raise ValueError("batch growth factor must be > 0")
        if self.precision not in ("float64", "float32"):
            raise ValueError(f"unknown precision {self.precision!r}")
        return self


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    train_acc: float
    val_acc: float
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class History:
    rows: list
    meta: dict = field(default_factory=dict)

    def validate(self):
        for row in self.rows:
            if not (0.0 <= row.train_acc <= 1.0 and 0.0 <= row.val_acc <= 1.0):
                raise ValueError(f"accuracy out of range in epoch {row.epoch}")
            if row.train_loss < 0 or row.val_loss < 0:
                raise ValueError(f"negative loss in epoch {row.epoch}")
        return self


def batch_schedule(epoch, config):
    """Batch size for a 0-based epoch index: base before the growth epoch,
    floor(base * factor), at least 1, from the growth epoch on."""
    if epoch < config.batch_growth_epoch:
        return config.base_batch_size
    return max(1, int(config.base_batch_size * config.batch_growth_factor))


def resolve_loss_kind(config, model):
    if config.loss != "auto":
        return config.loss
    return "bce+dice" if model.head == "segmenter" else "bce"


def _collate(samples, dtype):
    images = np.stack([s.image for s in samples]).astype(dtype)
    masks = np.stack([s.mask for s in samples]).astype(dtype)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return images, masks, labels


def _batch_loss(out, masks, labels, head, loss_kind, dtype):
    if head == "segmenter":
        return losses.combined_loss(out, masks, loss_kind)
    onehot = np.zeros((labels.size, 2), dtype=dtype)
    onehot[np.arange(labels.size), labels] = 1.0
    if loss_kind != "bce":
        raise ValueError(f"classifier training supports bce only, got {loss_kind!r}")
    return losses.bce_loss(out, onehot)


def _batch_accuracy(out_data, masks, labels, head):
    """(sum of per-item accuracy contributions, item count)."""
    if head == "segmenter":
        total = 0.0
        for prob, mask in zip(out_data, masks):
            d, _ = metrics.dice_iou(prob >= 0.5, mask >= 0.5)
            total += d
        return total, len(out_data)
    predicted = out_data.argmax(axis=1)
    return float((predicted == labels).sum()), len(labels)


def _eval_pass(model, dataset, loss_kind, batch_size, dtype):
    model.eval()
    loss_sum = 0.0
    acc_sum = 0.0
    count = 0
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            part = dataset.samples[start:start + batch_size]
            images, masks, labels = _collate(part, dtype)
            out = model.forward(images, train=False)
            loss = _batch_loss(out, masks, labels, model.head, loss_kind, dtype)
            loss_sum += float(loss.data) * len(part)
            acc, n = _batch_accuracy(out.data, masks, labels, model.head)
            acc_sum += acc
            count += n
    return acc_sum / count, loss_sum / count


def train(model, train_set, val_set, config):
    """Run exactly ``config.epochs`` epochs; returns (model, History).

    The model is left in eval mode.  A non-finite loss aborts with a
    diagnostic naming the epoch and batch.
    """
    config.validate()
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if val_set is None or len(val_set) == 0:
        raise ValueError("validation set is empty (pass the training set "
                         "to monitor training fit)")
    dtype = np.float32 if config.precision == "float32" else np.float64
    model.set_dtype(dtype)
    loss_kind = resolve_loss_kind(config, model)
    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(model.named_params(), config)
    rows = []
    for epoch in range(config.epochs):
        started = time.perf_counter()
        size = batch_schedule(epoch, config)
        order = rng.permutation(len(train_set))
        model.train()
        loss_sum = 0.0
        acc_sum = 0.0
        count = 0
        for batch_index, start in enumerate(range(0, len(order), size)):
            chosen = [train_set.samples[i] for i in order[start:start + size]]
            chosen = [augment(s, rng, config.augment_policy) for s in chosen]
            images, masks, labels = _collate(chosen, dtype)
            out = model.forward(images, train=True)
            loss = _batch_loss(out, masks, labels, model.head, loss_kind, dtype)
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch + 1}, "
                    f"batch {batch_index + 1}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.data) * len(chosen)
            acc, n = _batch_accuracy(out.data, masks, labels, model.head)
            acc_sum += acc
            count += n
        val_acc, val_loss = _eval_pass(model, val_set, loss_kind, size, dtype)
        seconds = time.perf_counter() - started if config.record_time else 0.0
        rows.append(HistoryRow(epoch + 1, acc_sum / count, val_acc,
                               loss_sum / count, val_loss, seconds))
    model.eval()
    meta = {
        "model": model.name,
        "head": model.head,
        "loss": loss_kind,
        "accuracy_definition": ("mean per-image dice at threshold 0.5"
                                if model.head == "segmenter"
                                else "fraction of correct labels"),
        "epochs": config.epochs,
        "seed": config.seed,
    }
    return model, History(rows, meta).validate()
