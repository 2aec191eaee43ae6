"""Backbones, freezing schemes and checkpoints."""

from .checkpoint import Checkpoint, build_model, transfer_weights
from .freezing import FreezePlan, apply_freeze_plan, freeze_plan
from .network import FEATURE_STRIDE, SeverityNet
from .spec import Backbone, FreezeScheme, HeadKind, InitKind, ModelSpec, validate_spec

__all__ = [
    "FEATURE_STRIDE",
    "Backbone",
    "Checkpoint",
    "FreezePlan",
    "FreezeScheme",
    "HeadKind",
    "InitKind",
    "ModelSpec",
    "SeverityNet",
    "apply_freeze_plan",
    "build_model",
    "freeze_plan",
    "transfer_weights",
    "validate_spec",
]
