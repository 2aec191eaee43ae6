"""Linear stacking of three member models."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from loguru import logger
from pydantic import BaseModel, Extra, root_validator, validator
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from ..data.manifest import TargetStats, destandardize_target, standardize_target
from ..errors import ArgumentError, ArtifactWriteError, ConfigurationError
from ..models.spec import Backbone
from ..scoring.binning import NUM_CLASSES
from ..utils.seeding import torch_generator

NUM_MEMBERS = 3


class StackMode(str, Enum):
    REGRESSION = "regression"
    ALL_CLASSES = "classification_all_classes"
    SINGLE_CLASS = "classification_single_class"

    @property
    def is_classification(self) -> bool:
        return self is not StackMode.REGRESSION


def check_member_backbones(backbones: Sequence[Union[Backbone, str]], members: Optional[Sequence[str]] = None) -> None:
    """An ensemble takes one member per backbone."""
    found = [Backbone(backbone) for backbone in backbones]
    if len(found) != NUM_MEMBERS or set(found) != set(Backbone):
        labels = [str(m) for m in members] if members is not None else [f"member-{i}" for i in range(len(found))]
        pairs = ", ".join(f"{label}={backbone.value}" for label, backbone in zip(labels, found))
        wanted = ", ".join(backbone.value for backbone in Backbone)
        raise ConfigurationError(f"ensemble members need one checkpoint per backbone ({wanted}), got {pairs}")


def _expected_shape(mode: StackMode) -> Tuple[int, int]:
    if mode is StackMode.REGRESSION:
        return 1, NUM_MEMBERS
    if mode is StackMode.ALL_CLASSES:
        return NUM_CLASSES, NUM_MEMBERS * NUM_CLASSES
    return NUM_CLASSES, NUM_MEMBERS


class EnsembleSpec(BaseModel):
    """Stacker weights plus provenance; ``weights`` is (outputs, inputs)."""

    mode: StackMode
    members: List[str]
    weights: List[List[float]]
    bias: List[float]
    target_stats: Optional[Dict[str, float]] = None
    batch_size: Optional[int] = None

    class Config:
        extra = Extra.forbid

    @validator("members")
    def validate_members(cls, value: List[str]) -> List[str]:
        if len(value) != NUM_MEMBERS:
            raise ValueError(f"an ensemble needs exactly {NUM_MEMBERS} members, got {len(value)}")
        return value

    @root_validator(skip_on_failure=True)
    def validate_shapes(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        rows, cols = _expected_shape(values["mode"])
        weights = values["weights"]
        if len(weights) != rows or any(len(row) != cols for row in weights):
            raise ValueError(f"{values['mode'].value} weights must be {rows}x{cols}")
        if len(values["bias"]) != rows:
            raise ValueError(f"{values['mode'].value} bias must have {rows} entries")
        return values

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    def bias_array(self) -> np.ndarray:
        return np.asarray(self.bias, dtype=np.float64)

    def stats(self) -> Optional[TargetStats]:
        return TargetStats(**self.target_stats) if self.target_stats else None

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.json(indent=2), encoding="utf-8")
        except OSError as exc:
            raise ArtifactWriteError(f"cannot write {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EnsembleSpec":
        return cls.parse_file(Path(path))


class StackerConfig(BaseModel):
    """Gradient-descent settings for the stacker; defaults mirror member training."""

    batch_size: int = 4
    epochs: int = 100
    learning_rate: float = 0.001
    weight_decay: float = 0.001
    momentum: float = 0.9
    seed: int = 0
    # Cosine-anneal the learning rate to zero over ``epochs`` (stepped once per epoch).
    anneal: bool = True

    class Config:
        extra = Extra.forbid

    @validator("seed")
    def validate_seed(cls, value: int) -> int:
        if value < 0:
            raise ValueError("seed must be non-negative")
        return value

    @validator("batch_size", "epochs")
    def validate_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value


class ClasswiseLinear(nn.Module):
    """Logit k = sum_m w[k, m] * x[:, m, k] + b[k]; no parameters shared across classes."""

    def __init__(self, num_classes: int = NUM_CLASSES, num_members: int = NUM_MEMBERS):
        super().__init__()
        self.weight = nn.Parameter(torch.full((num_classes, num_members), 1.0 / num_members))
        self.bias = nn.Parameter(torch.zeros(num_classes))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.einsum("nmk,km->nk", x, self.weight) + self.bias


def _averaging_linear(in_features: int, out_features: int) -> nn.Linear:
    layer = nn.Linear(in_features, out_features)
    with torch.no_grad():
        if out_features == 1:
            layer.weight.fill_(1.0 / in_features)
        else:
            # Identity blocks per member: each class logit starts as the member mean.
            layer.weight.copy_(torch.eye(out_features).repeat(1, in_features // out_features) / NUM_MEMBERS)
        layer.bias.zero_()
    return layer


def _stacker_module(mode: StackMode) -> nn.Module:
    if mode is StackMode.REGRESSION:
        return _averaging_linear(NUM_MEMBERS, 1)
    if mode is StackMode.ALL_CLASSES:
        return _averaging_linear(NUM_MEMBERS * NUM_CLASSES, NUM_CLASSES)
    return ClasswiseLinear()


def _check_member_outputs(member_outputs: np.ndarray, mode: StackMode) -> np.ndarray:
    outputs = np.asarray(member_outputs, dtype=np.float64)
    if mode is StackMode.REGRESSION:
        if outputs.ndim != 2 or outputs.shape[1] != NUM_MEMBERS:
            raise ArgumentError(f"regression stacking needs (n, {NUM_MEMBERS}) outputs, got {outputs.shape}")
    elif outputs.ndim != 3 or outputs.shape[1:] != (NUM_MEMBERS, NUM_CLASSES):
        raise ArgumentError(
            f"classification stacking needs (n, {NUM_MEMBERS}, {NUM_CLASSES}) outputs, got {outputs.shape}"
        )
    if outputs.shape[0] == 0:
        raise ArgumentError("member outputs must not be empty")
    return outputs


def _flatten_inputs(outputs: np.ndarray, mode: StackMode) -> np.ndarray:
    # all_classes input index is member * 10 + class.
    if mode is StackMode.ALL_CLASSES:
        return outputs.reshape(outputs.shape[0], NUM_MEMBERS * NUM_CLASSES)
    return outputs


def fit_stacker(
    member_outputs: np.ndarray,
    targets: Sequence[float],
    mode: Union[StackMode, str],
    config: StackerConfig = StackerConfig(),
    members: Optional[Sequence[str]] = None,
    target_stats: Optional[TargetStats] = None,
) -> EnsembleSpec:
    """Train the linear map on precomputed member outputs.

    Regression expects member outputs and targets in standardised units
    (MSE); classification expects logits and class labels (cross-entropy).
    """
    mode = StackMode(mode)
    outputs = _check_member_outputs(member_outputs, mode)
    targets = np.asarray(targets)
    if targets.shape != (outputs.shape[0],):
        raise ArgumentError(f"{outputs.shape[0]} member rows but targets shaped {targets.shape}")
    members = list(members) if members is not None else [f"member-{i}" for i in range(NUM_MEMBERS)]
    if len(members) != NUM_MEMBERS:
        raise ArgumentError(f"an ensemble needs exactly {NUM_MEMBERS} members, got {len(members)}")

    torch.manual_seed(config.seed)
    inputs = torch.as_tensor(_flatten_inputs(outputs, mode), dtype=torch.float64)
    if mode.is_classification:
        labels = torch.as_tensor(targets, dtype=torch.long)
        if bool(((labels < 0) | (labels >= NUM_CLASSES)).any()):
            raise ArgumentError(f"class labels must lie in [0, {NUM_CLASSES - 1}]")
        loss_fn = nn.CrossEntropyLoss()
    else:
        labels = torch.as_tensor(targets, dtype=torch.float64).reshape(-1, 1)
        loss_fn = nn.MSELoss()

    stacker = _stacker_module(mode).to(torch.float64)
    optimizer = torch.optim.SGD(
        stacker.parameters(),
        lr=config.learning_rate,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    loader = DataLoader(
        TensorDataset(inputs, labels),
        batch_size=config.batch_size,
        shuffle=True,
        generator=torch_generator(config.seed),
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=config.epochs) if config.anneal else None
    for epoch in range(1, config.epochs + 1):
        for batch_inputs, batch_labels in loader:
            optimizer.zero_grad()
            loss = loss_fn(stacker(batch_inputs), batch_labels)
            loss.backward()
            optimizer.step()
        if scheduler is not None:
            scheduler.step()
        if epoch == config.epochs or epoch % 50 == 0:
            with torch.no_grad():
                logger.debug("Stacker epoch {} loss={:.6f}", epoch, float(loss_fn(stacker(inputs), labels)))

    weight = stacker.weight.detach().cpu().numpy()
    bias = stacker.bias.detach().cpu().numpy()
    spec = EnsembleSpec(
        mode=mode,
        members=members,
        weights=weight.tolist(),
        bias=bias.reshape(-1).tolist(),
        target_stats=target_stats.as_dict() if target_stats else None,
        batch_size=config.batch_size,
    )
    logger.info("Fitted {} stacker on {} rows (batch size {})", mode.value, outputs.shape[0], config.batch_size)
    return spec


@dataclass(frozen=True)
class StackedPrediction:
    """Regression: ``scores``. Classification: ``logits``, ``classes``, ``probabilities``."""

    scores: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    classes: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None


def stack_linear(spec: EnsembleSpec, member_outputs: np.ndarray) -> np.ndarray:
    """Apply the linear map only (standardised units / raw logits)."""
    outputs = _check_member_outputs(member_outputs, spec.mode)
    weight = spec.weight_array()
    bias = spec.bias_array()
    if spec.mode is StackMode.SINGLE_CLASS:
        return np.einsum("nmk,km->nk", outputs, weight) + bias
    return _flatten_inputs(outputs, spec.mode) @ weight.T + bias


def predict_stacked(spec: EnsembleSpec, member_outputs: np.ndarray, destandardize: bool = True) -> StackedPrediction:
    stacked = stack_linear(spec, member_outputs)
    if spec.mode is StackMode.REGRESSION:
        scores = stacked.reshape(-1)
        stats = spec.stats()
        if destandardize and stats is not None:
            scores = destandardize_target(scores, stats)
        return StackedPrediction(scores=scores)
    shifted = stacked - stacked.max(axis=1, keepdims=True)
    probabilities = np.exp(shifted)
    probabilities /= probabilities.sum(axis=1, keepdims=True)
    return StackedPrediction(logits=stacked, classes=stacked.argmax(axis=1), probabilities=probabilities)


def least_squares_stacker(member_outputs: np.ndarray, targets: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Closed-form regression stacker: (weights over members, bias)."""
    outputs = _check_member_outputs(member_outputs, StackMode.REGRESSION)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (outputs.shape[0],):
        raise ArgumentError(f"{outputs.shape[0]} member rows but targets shaped {targets.shape}")
    design = np.column_stack([outputs, np.ones(outputs.shape[0])])
    solution, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return solution[:NUM_MEMBERS], float(solution[NUM_MEMBERS])


def restandardize_members(
    member_scores: Sequence[np.ndarray],
    stats: TargetStats,
) -> np.ndarray:
    """Stack per-member scores (target units) into (n, 3) standardised inputs."""
    if len(member_scores) != NUM_MEMBERS:
        raise ArgumentError(f"an ensemble needs exactly {NUM_MEMBERS} members, got {len(member_scores)}")
    lengths = {len(np.asarray(scores).reshape(-1)) for scores in member_scores}
    if len(lengths) != 1:
        raise ArgumentError(f"member predictions have misaligned lengths {sorted(lengths)}")
    columns = [standardize_target(np.asarray(scores, dtype=np.float64).reshape(-1), stats) for scores in member_scores]
    return np.column_stack(columns)


def stack_member_logits(member_logits: Sequence[np.ndarray]) -> np.ndarray:
    """(n, 10) logits from each member into (n, 3, 10)."""
    if len(member_logits) != NUM_MEMBERS:
        raise ArgumentError(f"an ensemble needs exactly {NUM_MEMBERS} members, got {len(member_logits)}")
    shapes = {np.asarray(logits).shape for logits in member_logits}
    if len(shapes) != 1:
        raise ArgumentError(f"member logits have misaligned shapes {sorted(shapes)}")
    return np.stack([np.asarray(logits, dtype=np.float64) for logits in member_logits], axis=1)
