"""Regression and classification losses.

All functions accept tensors (keeping autograd) or plain sequences, which are
promoted to float64 tensors.
"""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ArgumentError
from .config import LossKind, SmoothLossParams, TrainConfig

TensorLike = Union[torch.Tensor, Sequence[float], np.ndarray]


def _as_residuals(values: TensorLike) -> torch.Tensor:
    if not isinstance(values, torch.Tensor):
        values = torch.as_tensor(np.asarray(values, dtype=np.float64))
    values = values.reshape(-1)
    if values.numel() == 0:
        raise ArgumentError("residuals must not be empty")
    return values


def smooth_terms(x: torch.Tensor, params: SmoothLossParams = SmoothLossParams()) -> torch.Tensor:
    """a*x^2 inside |x| < c, |x| - b outside (discontinuous at |x| = c)."""
    magnitude = x.abs()
    return torch.where(magnitude < params.c, params.a * x * x, magnitude - params.b)


def smooth_loss(residuals: TensorLike, params: SmoothLossParams = SmoothLossParams()) -> torch.Tensor:
    x = _as_residuals(residuals)
    return torch.sqrt(smooth_terms(x, params).mean())


def mse_loss(residuals: TensorLike) -> torch.Tensor:
    x = _as_residuals(residuals)
    return (x * x).mean()


def cross_entropy_loss(logits: TensorLike, labels: TensorLike) -> torch.Tensor:
    if not isinstance(logits, torch.Tensor):
        logits = torch.as_tensor(np.asarray(logits, dtype=np.float64))
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if logits.dim() != 2 or logits.shape[0] != labels.shape[0] or labels.numel() == 0:
        raise ArgumentError(
            f"expected (n, k) logits and n labels, got {tuple(logits.shape)} and {tuple(labels.shape)}"
        )
    num_classes = logits.shape[1]
    if bool(((labels < 0) | (labels >= num_classes)).any()):
        raise ArgumentError(f"labels must lie in [0, {num_classes - 1}]")
    return F.cross_entropy(logits, labels)


LossFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


def criterion_for(config: TrainConfig) -> LossFn:
    """Map (model outputs, targets) to the configured loss."""
    if config.loss is LossKind.CROSS_ENTROPY:
        return cross_entropy_loss
    if config.loss is LossKind.SMOOTH:
        params = config.smooth
        return lambda outputs, targets: smooth_loss(outputs.reshape(-1) - targets.reshape(-1), params)
    return lambda outputs, targets: mse_loss(outputs.reshape(-1) - targets.reshape(-1))
