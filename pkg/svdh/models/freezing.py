"""Layer freezing schemes (RBs-n for ResNets, IRBs-n for MobileNetV2)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from loguru import logger

from .network import SeverityNet, mobilenet_stack_indices
from .spec import FreezeScheme, ModelSpec, validate_spec

RESNET_STEM = ("body.conv1.", "body.bn1.")
MOBILENET_STEM = ("body.features.0.",)


@dataclass(frozen=True)
class FreezePlan:
    frozen_prefixes: Tuple[str, ...]
    frozen_parameter_names: Tuple[str, ...]
    trainable_parameter_names: Tuple[str, ...]


def frozen_prefixes(spec: ModelSpec) -> Tuple[str, ...]:
    """Module name prefixes (dot-terminated) held fixed by the model's freezing scheme."""
    validate_spec(spec)
    depth = spec.freeze.depth
    if spec.freeze is FreezeScheme.NONE:
        return ()
    if spec.backbone.is_resnet:
        return RESNET_STEM + tuple(f"body.layer{stage}." for stage in range(1, depth + 1))
    prefixes: List[str] = list(MOBILENET_STEM)
    for stack in mobilenet_stack_indices(spec.desk_scale)[:depth]:
        prefixes.extend(f"body.features.{index}." for index in stack)
    return tuple(prefixes)


def freeze_plan(spec: ModelSpec, model: Optional[SeverityNet] = None) -> FreezePlan:
    """Partition parameter names into frozen and trainable, in model order."""
    prefixes = frozen_prefixes(spec)
    model = model if model is not None else SeverityNet(spec)
    frozen: List[str] = []
    trainable: List[str] = []
    for name, _ in model.named_parameters():
        if any(name.startswith(prefix) for prefix in prefixes):
            frozen.append(name)
        else:
            trainable.append(name)
    return FreezePlan(
        frozen_prefixes=prefixes,
        frozen_parameter_names=tuple(frozen),
        trainable_parameter_names=tuple(trainable),
    )


def apply_freeze_plan(model: SeverityNet, plan: FreezePlan) -> SeverityNet:
    frozen = set(plan.frozen_parameter_names)
    for name, parameter in model.named_parameters():
        parameter.requires_grad_(name not in frozen)
    model.set_frozen_prefixes(plan.frozen_prefixes)
    logger.debug(
        "Froze {} of {} parameter tensors ({})",
        len(frozen),
        len(frozen) + len(plan.trainable_parameter_names),
        model.spec.freeze.value,
    )
    return model
