"""Heatmap-over-radiograph rendering."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
from matplotlib import colormaps

from ..data.images import save_png
from ..errors import ArgumentError

DEFAULT_ALPHA = 0.4


def blend_overlay(image: np.ndarray, heatmap: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Per-pixel blend weight is alpha * heat, so zero heat leaves the radiograph untouched."""
    image = np.asarray(image, dtype=np.float64)
    heat = np.clip(np.asarray(heatmap, dtype=np.float64), 0.0, 1.0)
    if image.shape != heat.shape or image.ndim != 2:
        raise ArgumentError(f"image {image.shape} and heatmap {heat.shape} must be equal 2-D grids")
    if not 0.0 <= alpha <= 1.0:
        raise ArgumentError("alpha must lie in [0, 1]")
    gray = np.repeat(np.clip(image, 0.0, 1.0)[..., None], 3, axis=2)
    colour = colormaps["jet"](heat)[..., :3]
    weight = (alpha * heat)[..., None]
    return (1.0 - weight) * gray + weight * colour


def render_overlay(
    image: np.ndarray,
    heatmap: np.ndarray,
    out_path: Union[str, Path],
    alpha: float = DEFAULT_ALPHA,
) -> Path:
    """Write the jet-coloured heatmap blended over the grayscale image as PNG."""
    return save_png(blend_overlay(image, heatmap, alpha), out_path)
