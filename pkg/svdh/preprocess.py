"""Resize/normalise for evaluation and the training augmentation recipe."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torchvision.transforms.functional as TF
from pydantic import BaseModel, Extra, validator
from torchvision.transforms import InterpolationMode

from .errors import ConfigurationError, ImageValidationError

QUARTER_TURNS = (0, 90, 180, 270)
FULL_IMAGE_SIZE = (1024, 1024)
DESK_IMAGE_SIZE = (64, 64)

ImageLike = Union[np.ndarray, torch.Tensor]


def _split_csv(value):
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class AugmentPolicy(BaseModel):
    """Training-time augmentation draws; all fields live in the run configuration."""

    horizontal_flip_prob: float = 0.5
    intensity_scale_range: Tuple[float, float] = (0.9, 1.1)
    rotation_angles: Tuple[int, ...] = QUARTER_TURNS
    target_size: Tuple[int, int] = FULL_IMAGE_SIZE

    class Config:
        extra = Extra.forbid

    _split_lists = validator(
        "intensity_scale_range", "rotation_angles", "target_size", pre=True, allow_reuse=True
    )(_split_csv)

    @validator("horizontal_flip_prob")
    def validate_flip_prob(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("horizontal_flip_prob must lie in [0, 1]")
        return value

    @validator("intensity_scale_range")
    def validate_scale_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0 < low <= high:
            raise ValueError("intensity_scale_range needs 0 < low <= high")
        return value

    @validator("rotation_angles")
    def validate_angles(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("rotation_angles must not be empty")
        bad = [angle for angle in value if angle not in QUARTER_TURNS]
        if bad:
            raise ValueError(f"rotation angles must be quarter turns, got {bad}")
        return tuple(value)

    @validator("target_size")
    def validate_target_size(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        height, width = value
        if height != width or height < 32:
            raise ValueError("target_size must be square and at least 32 pixels")
        return value


@dataclass(frozen=True)
class PixelStats:
    """Global intensity mean/SD over resized training images."""

    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise ConfigurationError(f"pixel sd must be positive, got {self.sd}")

    def as_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class AugmentDraw:
    """One concrete draw of the augmentation policy."""

    flip: bool = False
    scale: float = 1.0
    quarter_turns: int = 0


def as_image_tensor(image: ImageLike) -> torch.Tensor:
    """Return a float32 tensor shaped (1, H, W)."""
    tensor = torch.as_tensor(np.asarray(image) if not isinstance(image, torch.Tensor) else image)
    tensor = tensor.to(torch.float32)
    if tensor.dim() == 2:
        tensor = tensor.unsqueeze(0)
    if tensor.dim() != 3 or tensor.shape[0] != 1:
        raise ImageValidationError(f"expected a single-channel image, got shape {tuple(tensor.shape)}")
    if tensor.numel() == 0:
        raise ImageValidationError("image has zero area")
    return tensor


def resize(image: ImageLike, target_size: Sequence[int]) -> torch.Tensor:
    tensor = as_image_tensor(image)
    size = [int(target_size[0]), int(target_size[1])]
    if list(tensor.shape[-2:]) == size:
        return tensor.clone()
    return TF.resize(tensor, size, interpolation=InterpolationMode.BILINEAR, antialias=False)


def normalize(tensor: torch.Tensor, stats: PixelStats) -> torch.Tensor:
    return (tensor - stats.mean) / stats.sd


def prepare_eval(
    image: ImageLike,
    stats: PixelStats,
    target_size: Sequence[int] = FULL_IMAGE_SIZE,
) -> torch.Tensor:
    """Resize then normalise; pure and deterministic."""
    return normalize(resize(image, target_size), stats)


def draw_augmentation(policy: AugmentPolicy, rng: np.random.Generator) -> AugmentDraw:
    flip = bool(rng.random() < policy.horizontal_flip_prob)
    low, high = policy.intensity_scale_range
    scale = float(rng.uniform(low, high))
    angle = int(policy.rotation_angles[int(rng.integers(len(policy.rotation_angles)))])
    return AugmentDraw(flip=flip, scale=scale, quarter_turns=angle // 90)


def apply_augmentation(tensor: torch.Tensor, draw: AugmentDraw) -> torch.Tensor:
    """Flip, intensity-scale (clamped to [0, 1]) and rotate a resized image.

    Flips and quarter turns are pixel permutations, so no interpolation occurs.
    """
    if draw.flip:
        tensor = TF.hflip(tensor)
    if draw.scale != 1.0:
        tensor = torch.clamp(tensor * draw.scale, 0.0, 1.0)
    if draw.quarter_turns % 4:
        tensor = torch.rot90(tensor, k=draw.quarter_turns % 4, dims=(-2, -1))
    return tensor


def prepare_train(
    image: ImageLike,
    policy: AugmentPolicy,
    stats: PixelStats,
    rng: np.random.Generator,
    draw: Optional[AugmentDraw] = None,
) -> torch.Tensor:
    """Resize, augment, normalise. ``draw`` forces a specific augmentation."""
    tensor = resize(image, policy.target_size)
    tensor = apply_augmentation(tensor, draw or draw_augmentation(policy, rng))
    return normalize(tensor, stats)


def compute_pixel_stats(images: Iterable[ImageLike], target_size: Sequence[int]) -> PixelStats:
    """Accumulate global mean/SD over resized images in float64."""
    total = 0.0
    total_sq = 0.0
    count = 0
    for image in images:
        pixels = resize(image, target_size).to(torch.float64)
        total += float(pixels.sum())
        total_sq += float((pixels * pixels).sum())
        count += pixels.numel()
    if count == 0:
        raise ImageValidationError("no training images to compute pixel statistics from")
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    return PixelStats(mean=mean, sd=float(np.sqrt(variance)))
