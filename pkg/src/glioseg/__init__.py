"""Semantic segmentation engine for brain-MRI-style images.

From-scratch reverse-mode autodiff on numpy arrays, convolutional
building blocks, four reference architectures, a deterministic training
loop with transfer-learning support, and a classify-then-segment
prediction pipeline.  Hot kernels run numba-compiled when available;
set ``GLIOSEG_BACKEND=numpy`` before import to force the fallback.
"""

# the train()/augment() functions are reachable via their submodules only:
# re-exporting them here would shadow glioseg.train / glioseg.augment
from .augment import AugmentPolicy
from .backends import backend_name
from .blocks import (BottleneckBlock, ConvBlock, ParamAudit,
                     PreactResidualBlock, SEBlock, param_count)
from .data import (Dataset, Sample, SynthParams, load_dataset,
                   normalize_resize, resize_dataset, save_dataset, split,
                   synth_dataset)
from .gradcheck import grad_check
from .losses import bce_loss, combined_loss, dice_loss
from .metrics import (ClassScores, ConfusionCounts, EvalReport,
                      classification_scores, dice_iou, evaluate, history_csv,
                      mean_dice, overlay_render)
from .models import (DEFAULT_CHANNELS, MODEL_NAMES, ModelGraph, build_model,
                     validate_channel_sequence)
from .optim import FreezeSelector, freeze, make_optimizer
from .pipeline import (Prediction, classify, predict_dataset, route_predict,
                       save_predictions, uncertainty_map)
from .tensor import Tensor, no_grad
from .train import History, HistoryRow, TrainConfig, batch_schedule
from .weights import ArchiveError, LoadReport, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "AugmentPolicy", "ArchiveError", "BottleneckBlock", "ClassScores",
    "ConfusionCounts", "ConvBlock", "DEFAULT_CHANNELS", "Dataset",
    "EvalReport", "FreezeSelector", "History", "HistoryRow", "LoadReport",
    "MODEL_NAMES", "ModelGraph", "ParamAudit", "PreactResidualBlock",
    "Prediction", "SEBlock", "Sample", "SynthParams", "Tensor",
    "TrainConfig", "augment", "backend_name", "batch_schedule", "bce_loss",
    "build_model", "classification_scores", "classify", "combined_loss",
    "dice_iou", "dice_loss", "evaluate", "freeze", "grad_check",
    "history_csv", "load_dataset", "load_weights", "make_optimizer",
    "mean_dice", "no_grad", "normalize_resize", "overlay_render",
    "param_count", "predict_dataset", "resize_dataset", "route_predict",
    "save_dataset", "save_predictions", "save_weights", "split",
    "synth_dataset", "train", "uncertainty_map", "validate_channel_sequence",
    "__version__",
]
