"""Losses, datasets and the optimisation loop."""

from .config import LossKind, SmoothLossParams, TrainConfig, TrainTask, pretrain_defaults
from .losses import cross_entropy_loss, mse_loss, smooth_loss
from .service import TrainingResult, build_optimizer, train

__all__ = [
    "LossKind",
    "SmoothLossParams",
    "TrainConfig",
    "TrainTask",
    "TrainingResult",
    "build_optimizer",
    "cross_entropy_loss",
    "mse_loss",
    "pretrain_defaults",
    "smooth_loss",
    "train",
]
