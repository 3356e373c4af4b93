"""Training objectives: binary cross-entropy and soft dice."""

from .tensor import Tensor

BCE_EPS = 1e-7


def bce_loss(probabilities, targets):
    """Mean binary cross-entropy of probabilities against {0,1} targets.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    p, y = Tensor._coerce(probabilities), Tensor._coerce(targets)
    if p.data.shape != y.data.shape:
        raise ValueError(f"shape mismatch: {p.data.shape} vs {y.data.shape}")
    pc = p.clip(BCE_EPS, 1.0 - BCE_EPS)
    return -(y * pc.log() + (1.0 - y) * (1.0 - pc).log()).mean()


def dice_loss(predicted, target, smooth=1.0):
    """Soft dice loss: 1 - (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth)."""
    if smooth <= 0:
        raise ValueError("smooth must be > 0")
    p, g = Tensor._coerce(predicted), Tensor._coerce(target)
    if p.data.shape != g.data.shape:
        raise ValueError(f"shape mismatch: {p.data.shape} vs {g.data.shape}")
    overlap = (p * g).sum()
    return 1.0 - (2.0 * overlap + smooth) / (p.sum() + g.sum() + smooth)


def combined_loss(predicted, target, kind, smooth=1.0):
    """Segmentation objective by name: bce | dice | bce+dice."""
    if kind == "bce":
        return bce_loss(predicted, target)
    if kind == "dice":
        return dice_loss(predicted, target, smooth)
    if kind == "bce+dice":
        return bce_loss(predicted, target) + dice_loss(predicted, target, smooth)
    raise ValueError(f"unknown loss kind {kind!r}")
