"""Manifests, image I/O and synthetic phantoms."""

from .images import load_image, save_png
from .manifest import (
    ImageRecord,
    Manifest,
    Split,
    TargetStats,
    Task,
    destandardize_target,
    load_manifest,
    standardize_target,
    write_manifest,
)
from .synthetic import PhantomGrades, generate_synthetic, write_synthetic_dataset

__all__ = [
    "ImageRecord",
    "Manifest",
    "PhantomGrades",
    "Split",
    "TargetStats",
    "Task",
    "destandardize_target",
    "generate_synthetic",
    "load_image",
    "load_manifest",
    "save_png",
    "standardize_target",
    "write_manifest",
    "write_synthetic_dataset",
]
