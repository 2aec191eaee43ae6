"""Grad-CAM heatmaps and overlay reports."""

from .gradcam import Heatmap, grad_cam, grad_cam_batch
from .overlay import blend_overlay, render_overlay
from .service import ExplainResult, explain_cases

__all__ = [
    "ExplainResult",
    "Heatmap",
    "blend_overlay",
    "explain_cases",
    "grad_cam",
    "grad_cam_batch",
    "render_overlay",
]
