"""Checkpoint persistence and backbone weight transfer."""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import torch
from loguru import logger

from ..data.manifest import TargetStats
from ..errors import ArtifactWriteError, CheckpointIncompatibleError
from ..preprocess import PixelStats
from .freezing import apply_freeze_plan, freeze_plan
from .network import SeverityNet, head_prefix
from .spec import InitKind, ModelSpec, validate_spec

CHECKPOINT_FORMAT = "svdh-checkpoint/1"


@dataclass
class Checkpoint:
    """Everything needed to rebuild a model for standalone inference."""

    spec: ModelSpec
    task: str
    state_dict: Dict[str, torch.Tensor]
    target_stats: Optional[TargetStats] = None
    pixel_stats: Optional[PixelStats] = None
    image_size: Tuple[int, int] = (1024, 1024)
    binning_edges: Optional[Tuple[float, ...]] = None
    epoch: int = 0
    extra: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: SeverityNet, task: str, **kwargs) -> "Checkpoint":
        state = OrderedDict((name, tensor.detach().cpu().clone()) for name, tensor in model.state_dict().items())
        return cls(spec=model.spec, task=task, state_dict=state, **kwargs)

    def to_payload(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "spec": json.loads(self.spec.json()),
            "task": self.task,
            "state_dict": OrderedDict(self.state_dict),
            "target_stats": self.target_stats.as_dict() if self.target_stats else None,
            "pixel_stats": self.pixel_stats.as_dict() if self.pixel_stats else None,
            "image_size": [int(v) for v in self.image_size],
            "binning_edges": [float(e) for e in self.binning_edges] if self.binning_edges else None,
            "epoch": int(self.epoch),
            "extra": {key: float(value) for key, value in self.extra.items()},
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            torch.save(self.to_payload(), path)
        except OSError as exc:
            raise ArtifactWriteError(f"cannot write checkpoint {path}: {exc}") from exc
        logger.info("Saved {} checkpoint (epoch {}) to {}", self.task, self.epoch, path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Checkpoint":
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
        if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointIncompatibleError(f"{path} is not a {CHECKPOINT_FORMAT} file")
        target_stats = payload.get("target_stats")
        pixel_stats = payload.get("pixel_stats")
        edges = payload.get("binning_edges")
        return cls(
            spec=ModelSpec.parse_obj(payload["spec"]),
            task=payload["task"],
            state_dict=OrderedDict(payload["state_dict"]),
            target_stats=TargetStats(**target_stats) if target_stats else None,
            pixel_stats=PixelStats(**pixel_stats) if pixel_stats else None,
            image_size=tuple(payload["image_size"]),
            binning_edges=tuple(edges) if edges else None,
            epoch=int(payload.get("epoch", 0)),
            extra=dict(payload.get("extra") or {}),
        )

    def build_model(self) -> SeverityNet:
        """Rebuild the saved network with its exact weights (no freezing applied)."""
        model = SeverityNet(self.spec.copy(update={"init": InitKind.SCRATCH, "checkpoint": None}))
        model.load_state_dict(self.state_dict, strict=True)
        return model


def _split_backbone(state: Dict[str, torch.Tensor], prefix: str) -> Dict[str, torch.Tensor]:
    return {name: tensor for name, tensor in state.items() if not name.startswith(prefix)}


def transfer_weights(
    source: Union[Checkpoint, str, Path],
    spec: ModelSpec,
    task: Optional[str] = None,
) -> SeverityNet:
    """Copy every backbone tensor from ``source`` into a fresh model for ``spec``.

    The head is reused only when ``task`` matches the source's task and the
    head widths agree; otherwise it keeps its fresh initialisation.
    """
    validate_spec(spec)
    if not isinstance(source, Checkpoint):
        source = Checkpoint.load(source)
    target = SeverityNet(spec.copy(update={"init": InitKind.SCRATCH, "checkpoint": None}))
    target_state = target.state_dict()

    source_backbone = _split_backbone(source.state_dict, head_prefix(source.spec.backbone))
    target_backbone = _split_backbone(target_state, target.head_prefix)
    missing: List[str] = [name for name in target_backbone if name not in source_backbone]
    unexpected: List[str] = [name for name in source_backbone if name not in target_backbone]
    mismatched: List[str] = [
        name
        for name, tensor in source_backbone.items()
        if name in target_backbone and tuple(tensor.shape) != tuple(target_backbone[name].shape)
    ]
    if source.spec.backbone is not spec.backbone or missing or unexpected or mismatched:
        raise CheckpointIncompatibleError(
            f"checkpoint backbone {source.spec.backbone.value} cannot initialise {spec.backbone.value}",
            missing=missing,
            unexpected=unexpected,
            mismatched=mismatched,
        )

    merged = OrderedDict(target_state)
    merged.update(source_backbone)
    reuse_head = task is not None and task == source.task and source.spec.head_width == spec.head_width
    if reuse_head:
        merged.update({name: tensor for name, tensor in source.state_dict.items() if name not in source_backbone})
    target.load_state_dict(merged, strict=True)
    target.spec = spec
    logger.info(
        "Transferred {} backbone tensors from {} checkpoint; head {}",
        len(source_backbone),
        source.task,
        "reused" if reuse_head else "re-initialised",
    )
    return target


def build_model(spec: ModelSpec, task: Optional[str] = None) -> SeverityNet:
    """Construct a model for ``spec`` and apply its freezing scheme."""
    validate_spec(spec)
    if spec.init is InitKind.CHECKPOINT:
        model = transfer_weights(spec.checkpoint, spec, task=task)
    else:
        model = SeverityNet(spec)
    return apply_freeze_plan(model, freeze_plan(spec, model))
