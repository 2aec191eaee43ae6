"""Pydantic schemas for every JSON artifact the toolkit writes."""

from __future__ import annotations

from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, validator


class MetricsReport(BaseModel):
    kind: Literal["regression", "classification"]
    n: int
    pcc: Optional[float] = Field(None, description="Null when either series is constant.")
    mae: float
    rmse: float
    accuracy: Optional[float] = None
    balanced_accuracy: Optional[float] = None
    confusion: Optional[List[List[int]]] = None
    labels: Optional[List[str]] = None
    warning: Optional[str] = None

    @validator("confusion")
    def validate_confusion(cls, value: Optional[List[List[int]]]) -> Optional[List[List[int]]]:
        if value is not None and any(len(row) != len(value) for row in value):
            raise ValueError("confusion matrix must be square")
        return value


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    train_mae: float
    val_mae: float
    wall_seconds: float


class CamCaseOut(BaseModel):
    kind: Literal["TP", "TN", "FP", "FN"]
    id: str
    true: float
    predicted: float
    overlay_path: str


class CamReport(BaseModel):
    task: str
    heuristic: bool = Field(False, description="True when classes were mapped to bin midpoints.")
    cases: List[CamCaseOut] = Field(default_factory=list)
    empty_kinds: List[str] = Field(default_factory=list)


class RunRecord(BaseModel):
    command: str
    argv: List[str]
    seed: int
    config: Dict[str, Any]
    started_at: datetime
    finished_at: Optional[datetime] = None
    versions: Dict[str, str] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)


class StackReport(BaseModel):
    mode: str
    fit_split: str
    eval_split: str
    ensemble: MetricsReport
    members: Dict[str, MetricsReport]
