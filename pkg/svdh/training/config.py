"""Training hyperparameters."""

from __future__ import annotations

from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, Extra, Field, root_validator, validator

from ..data.manifest import Task
from ..models.spec import HeadKind


class TrainTask(str, Enum):
    BONE_AGE = "bone_age"
    SVDH_REGRESSION = "svdh_regression"
    SVDH_CLASSIFICATION = "svdh_classification"

    @property
    def is_classification(self) -> bool:
        return self is TrainTask.SVDH_CLASSIFICATION

    @property
    def head(self) -> HeadKind:
        return HeadKind.CLASSIFICATION if self.is_classification else HeadKind.REGRESSION

    @property
    def manifest_task(self) -> Task:
        return Task.BONE_AGE if self is TrainTask.BONE_AGE else Task.SVDH


class LossKind(str, Enum):
    MSE = "mse"
    SMOOTH = "smooth"
    CROSS_ENTROPY = "cross_entropy"


class SmoothLossParams(BaseModel):
    a: float = 0.6
    b: float = 0.0
    c: float = 1.0

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    @validator("c")
    def validate_c(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("smooth loss threshold c must be positive")
        return value


class TrainConfig(BaseModel):
    task: TrainTask = TrainTask.SVDH_REGRESSION
    epochs: int = 100
    batch_size: int = 4
    learning_rate: float = 0.001
    weight_decay: float = 0.001
    momentum: float = 0.9
    loss: Optional[LossKind] = None
    seed: int = 0
    smooth: SmoothLossParams = Field(default_factory=SmoothLossParams)

    class Config:
        extra = Extra.forbid

    @validator("seed")
    def validate_seed(cls, value: int) -> int:
        if value < 0:
            raise ValueError("seed must be non-negative")
        return value

    @validator("epochs", "batch_size")
    def validate_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @validator("learning_rate")
    def validate_learning_rate(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("learning_rate must be positive")
        return value

    @validator("weight_decay")
    def validate_weight_decay(cls, value: float) -> float:
        if value < 0:
            raise ValueError("weight_decay must be non-negative")
        return value

    @validator("momentum")
    def validate_momentum(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        return value

    @root_validator(skip_on_failure=True)
    def pair_loss_with_task(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        task: TrainTask = values["task"]
        loss: Optional[LossKind] = values.get("loss")
        if loss is None:
            values["loss"] = LossKind.CROSS_ENTROPY if task.is_classification else LossKind.MSE
        elif task.is_classification and loss is not LossKind.CROSS_ENTROPY:
            raise ValueError(f"loss {loss.value} needs a regression task, got {task.value}")
        elif not task.is_classification and loss is LossKind.CROSS_ENTROPY:
            raise ValueError(f"cross_entropy needs the classification task, got {task.value}")
        return values


def pretrain_defaults() -> TrainConfig:
    """Bone-age pretraining recipe (50 epochs, otherwise the finetuning settings)."""
    return TrainConfig(task=TrainTask.BONE_AGE, epochs=50)
