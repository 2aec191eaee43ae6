"""Grad-CAM over the last convolutional stage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ArgumentError
from ..models.network import SeverityNet


@dataclass(frozen=True)
class Heatmap:
    """``values`` is at input resolution and scaled to max 1 unless all zero.

    ``raw`` keeps the rectified map at feature-map resolution, before scaling.
    """

    values: np.ndarray
    raw: np.ndarray
    target: int

    @property
    def source_resolution(self) -> Tuple[int, int]:
        return tuple(self.raw.shape)

    @property
    def resolution(self) -> Tuple[int, int]:
        return tuple(self.values.shape)


class _FeatureCapture:
    """Forward hook that keeps the activation and its gradient."""

    def __init__(self, layer: torch.nn.Module):
        self.activations: Optional[torch.Tensor] = None
        self.gradients: Optional[torch.Tensor] = None
        self._handle = layer.register_forward_hook(self._on_forward)

    def _on_forward(self, module, inputs, output: torch.Tensor) -> None:
        self.activations = output
        output.register_hook(self._on_backward)

    def _on_backward(self, grad: torch.Tensor) -> None:
        self.gradients = grad

    def close(self) -> None:
        self._handle.remove()


def _resolve_targets(outputs: torch.Tensor, target: Optional[int]) -> torch.Tensor:
    width = outputs.shape[1]
    if target is None:
        return outputs.argmax(dim=1) if width > 1 else torch.zeros(outputs.shape[0], dtype=torch.long)
    if not 0 <= int(target) < width:
        raise ArgumentError(f"target {target} outside the head's {width} output(s)")
    return torch.full((outputs.shape[0],), int(target), dtype=torch.long)


def grad_cam_batch(
    model: SeverityNet,
    images: torch.Tensor,
    target: Optional[int] = None,
) -> List[Heatmap]:
    """Heatmaps for a (B, 1, H, W) batch of preprocessed images.

    ``target`` is a class index for classification heads (default: the
    predicted class) and must be None or 0 for the regression head.
    """
    if images.dim() == 3:
        images = images.unsqueeze(0)
    if images.dim() != 4:
        raise ArgumentError(f"expected a (B, 1, H, W) batch, got {tuple(images.shape)}")
    device = next(model.parameters()).device
    was_training = model.training
    model.eval()
    capture = _FeatureCapture(model.feature_layer())
    try:
        with torch.enable_grad():
            inputs = images.to(device).detach().requires_grad_(True)
            outputs = model(inputs)
            chosen = _resolve_targets(outputs, target).to(device)
            selected = outputs.gather(1, chosen.unsqueeze(1)).sum()
            model.zero_grad(set_to_none=True)
            selected.backward()
        activations = capture.activations.detach()
        gradients = capture.gradients.detach()
    finally:
        capture.close()
        model.zero_grad(set_to_none=True)
        model.train(was_training)

    weights = gradients.mean(dim=(2, 3), keepdim=True)
    cams = F.relu((weights * activations).sum(dim=1, keepdim=True))
    upsampled = F.interpolate(cams, size=images.shape[-2:], mode="bilinear", align_corners=False)
    upsampled = upsampled.clamp_min(0.0)

    heatmaps = []
    for index in range(images.shape[0]):
        values = upsampled[index, 0].cpu().to(torch.float64).numpy()
        peak = float(values.max())
        if peak > 0:
            values = values / peak
        heatmaps.append(
            Heatmap(
                values=values,
                raw=cams[index, 0].cpu().to(torch.float64).numpy(),
                target=int(chosen[index]),
            )
        )
    return heatmaps


def grad_cam(model: SeverityNet, image: torch.Tensor, target: Optional[int] = None) -> Heatmap:
    """Single-image Grad-CAM; ``image`` is (1, H, W) or (1, 1, H, W)."""
    batch = image.unsqueeze(0) if image.dim() == 3 else image
    if batch.shape[0] != 1:
        raise ArgumentError("grad_cam takes one image; use grad_cam_batch for batches")
    return grad_cam_batch(model, batch, target)[0]
