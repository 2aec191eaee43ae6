"""Model specification: backbone, head, freezing scheme and weight provenance."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Extra

from ..errors import ConfigurationError
from ..scoring.binning import NUM_CLASSES


class Backbone(str, Enum):
    RESNET34 = "resnet34"
    RESNET50 = "resnet50"
    MOBILENETV2 = "mobilenetv2"

    @property
    def is_resnet(self) -> bool:
        return self in (Backbone.RESNET34, Backbone.RESNET50)


class HeadKind(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class FreezeScheme(str, Enum):
    NONE = "none"
    RBS_1 = "RBs-1"
    RBS_2 = "RBs-2"
    IRBS_2 = "IRBs-2"
    IRBS_3 = "IRBs-3"

    @property
    def depth(self) -> int:
        """Number of block stacks frozen after the stem."""
        return 0 if self is FreezeScheme.NONE else int(self.value[-1])


class InitKind(str, Enum):
    SCRATCH = "scratch"
    CHECKPOINT = "checkpoint"


RESNET_SCHEMES = frozenset({FreezeScheme.NONE, FreezeScheme.RBS_1, FreezeScheme.RBS_2})
MOBILENET_SCHEMES = frozenset({FreezeScheme.NONE, FreezeScheme.IRBS_2, FreezeScheme.IRBS_3})


class ModelSpec(BaseModel):
    backbone: Backbone = Backbone.RESNET50
    head: HeadKind = HeadKind.REGRESSION
    freeze: FreezeScheme = FreezeScheme.NONE
    init: InitKind = InitKind.SCRATCH
    checkpoint: Optional[Path] = None
    desk_scale: bool = False

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    @property
    def head_width(self) -> int:
        return 1 if self.head is HeadKind.REGRESSION else NUM_CLASSES


def validate_spec(spec: ModelSpec) -> ModelSpec:
    """Reject backbone/freeze pairings and dangling checkpoint inits."""
    allowed = RESNET_SCHEMES if spec.backbone.is_resnet else MOBILENET_SCHEMES
    if spec.freeze not in allowed:
        raise ConfigurationError(
            f"freeze scheme {spec.freeze.value} is not valid for backbone {spec.backbone.value}"
        )
    if spec.init is InitKind.CHECKPOINT and spec.checkpoint is None:
        raise ConfigurationError("init=checkpoint requires model.checkpoint")
    return spec
