"""Grayscale radiograph decoding and encoding."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..errors import ArtifactWriteError, ImageValidationError


def load_image(path: Union[str, Path]) -> np.ndarray:
    """Decode an 8- or 16-bit grayscale PNG/JPEG into float32 intensities in [0, 1]."""
    with Image.open(path) as image:
        if image.mode in ("I;16", "I;16B", "I;16L", "I"):
            pixels = np.asarray(image, dtype=np.float32)
            scale = 65535.0
        else:
            pixels = np.asarray(image.convert("L"), dtype=np.float32)
            scale = 255.0
    if pixels.size == 0:
        raise ImageValidationError(f"image {path} has zero area")
    return np.clip(pixels / scale, 0.0, 1.0)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities to 8-bit."""
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    """Write a 2-D uint8 grid (or 3-D RGB grid) as PNG."""
    path = Path(path)
    if pixels.dtype != np.uint8:
        pixels = to_uint8(pixels)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(pixels).save(path, format="PNG")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {path}: {exc}") from exc
    return path
