"""Process settings and run configuration."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import torch
from dotenv import dotenv_values
from pydantic import BaseModel, BaseSettings, Extra, Field, ValidationError, root_validator, validator

from .data.manifest import Split
from .ensemble.service import StackerConfig, StackMode
from .errors import ConfigurationError
from .models.spec import Backbone, FreezeScheme, HeadKind, InitKind, ModelSpec, validate_spec
from .preprocess import DESK_IMAGE_SIZE, AugmentPolicy
from .scoring.binning import DEFAULT_EDGES, SeverityBinning, validate_edges
from .training.config import TrainConfig, TrainTask, pretrain_defaults

TRUE_VALUES = {"1", "true", "yes", "on"}


class Settings(BaseSettings):
    """Settings pulled from environment variables or `.env` files."""

    log_level: str = Field("INFO", env="SVDH_LOG_LEVEL")
    log_json: bool = Field(False, env="SVDH_LOG_JSON")
    device: str = Field("cpu", env="SVDH_DEVICE")
    num_workers: int = Field(0, env="SVDH_NUM_WORKERS")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = Extra.ignore

    @validator("log_level", pre=True)
    def normalize_log_level(cls, value: str) -> str:
        normalized = str(value or "INFO").strip().upper()
        if normalized not in {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"SVDH_LOG_LEVEL {value!r} is not a loguru level")
        return normalized

    @validator("device", pre=True)
    def validate_device(cls, value: str) -> str:
        normalized = str(value or "cpu").strip().lower()
        if normalized not in {"cpu", "cuda", "auto"}:
            raise ValueError("SVDH_DEVICE must be one of cpu, cuda, auto.")
        return normalized

    @validator("num_workers")
    def validate_num_workers(cls, value: int) -> int:
        if value < 0:
            raise ValueError("SVDH_NUM_WORKERS must be non-negative.")
        return value

    def torch_device(self) -> str:
        if self.device == "auto":
            return "cuda" if torch.cuda.is_available() else "cpu"
        if self.device == "cuda" and not torch.cuda.is_available():
            raise ConfigurationError("SVDH_DEVICE=cuda but no CUDA device is available")
        return self.device


@lru_cache()
def get_settings() -> Settings:
    """Return a cached instance of process settings."""
    env_path = Path(".env")
    if env_path.exists():
        return Settings(_env_file=env_path)
    return Settings()


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class ModelSection(BaseModel):
    backbone: Backbone = Backbone.RESNET50
    head: Optional[HeadKind] = None
    freeze: FreezeScheme = FreezeScheme.NONE
    init: InitKind = InitKind.SCRATCH
    checkpoint: Optional[Path] = None

    class Config:
        extra = Extra.forbid

    def spec_for(self, task: TrainTask, desk_scale: bool) -> ModelSpec:
        """ModelSpec for ``task``; an explicit head must agree with it."""
        if self.head is not None and self.head is not task.head:
            raise ConfigurationError(f"model.head={self.head.value} conflicts with task {task.value}")
        return validate_spec(
            ModelSpec(
                backbone=self.backbone,
                head=task.head,
                freeze=self.freeze,
                init=self.init,
                checkpoint=self.checkpoint,
                desk_scale=desk_scale,
            )
        )


class BinningSection(BaseModel):
    edges: Tuple[float, ...] = DEFAULT_EDGES

    class Config:
        extra = Extra.forbid

    _split_edges = validator("edges", pre=True, allow_reuse=True)(_split_csv)

    @validator("edges")
    def validate_binning_edges(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        return validate_edges(value)

    def binning(self) -> SeverityBinning:
        return SeverityBinning(self.edges)


class DataSection(BaseModel):
    manifest: Optional[Path] = None
    check_images: bool = True

    class Config:
        extra = Extra.forbid


class EnsembleSection(BaseModel):
    members: List[Path] = Field(default_factory=list)
    mode: StackMode = StackMode.REGRESSION
    fit_split: Split = Split.VALIDATION
    eval_split: Split = Split.TEST
    stacker: StackerConfig = Field(default_factory=StackerConfig)

    class Config:
        extra = Extra.forbid

    _split_members = validator("members", pre=True, allow_reuse=True)(_split_csv)


class EvaluateSection(BaseModel):
    checkpoint: Optional[Path] = None
    split: Split = Split.TEST
    batch_size: int = 16

    class Config:
        extra = Extra.forbid


class ExplainSection(BaseModel):
    checkpoint: Optional[Path] = None
    split: Split = Split.TEST
    max_per_kind: int = 1
    alpha: float = 0.4

    class Config:
        extra = Extra.forbid

    @validator("max_per_kind")
    def validate_max_per_kind(cls, value: int) -> int:
        if value < 1:
            raise ValueError("max_per_kind must be at least 1")
        return value


class RunConfig(BaseModel):
    """Every knob of a run; unknown keys are rejected at every level."""

    seed: int = 0
    desk_scale: bool = False
    output_dir: Path = Path("runs/latest")
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    pretrain: TrainConfig = Field(default_factory=pretrain_defaults)
    augment: AugmentPolicy = Field(default_factory=AugmentPolicy)
    binning: BinningSection = Field(default_factory=BinningSection)
    data: DataSection = Field(default_factory=DataSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    evaluate: EvaluateSection = Field(default_factory=EvaluateSection)
    explain: ExplainSection = Field(default_factory=ExplainSection)

    class Config:
        extra = Extra.forbid

    @validator("seed")
    def validate_seed(cls, value: int) -> int:
        if value < 0:
            raise ValueError("seed must be non-negative")
        return value

    @root_validator(pre=True)
    def desk_image_size(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        desk = str(values.get("desk_scale", False)).strip().lower() in TRUE_VALUES
        augment = values.get("augment")
        if desk and (augment is None or (isinstance(augment, dict) and "target_size" not in augment)):
            augment = dict(augment or {})
            augment["target_size"] = DESK_IMAGE_SIZE
            values["augment"] = augment
        pretrain = values.get("pretrain")
        if isinstance(pretrain, dict):
            merged = {"task": TrainTask.BONE_AGE.value, "epochs": 50}
            merged.update(pretrain)
            values["pretrain"] = merged
        return values

    @root_validator(skip_on_failure=True)
    def propagate_seed(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        seed = values["seed"]
        values["train"] = values["train"].copy(update={"seed": seed})
        values["pretrain"] = values["pretrain"].copy(update={"seed": seed})
        ensemble: EnsembleSection = values["ensemble"]
        values["ensemble"] = ensemble.copy(update={"stacker": ensemble.stacker.copy(update={"seed": seed})})
        if values["pretrain"].task is not TrainTask.BONE_AGE:
            raise ValueError("pretrain.task must be bone_age")
        return values

    def train_spec(self) -> ModelSpec:
        return self.model.spec_for(self.train.task, self.desk_scale)

    def pretrain_spec(self) -> ModelSpec:
        spec = self.model.copy(update={"head": None}).spec_for(self.pretrain.task, self.desk_scale)
        return spec.copy(update={"freeze": FreezeScheme.NONE, "init": InitKind.SCRATCH, "checkpoint": None})

    def resolved(self) -> Dict[str, Any]:
        """JSON-ready dump for run.json."""
        return json.loads(self.json())


def fold_dotted(flat: Mapping[str, Optional[str]], source: str = "config") -> Dict[str, Any]:
    """Turn ``{"train.epochs": "5"}`` into ``{"train": {"epochs": "5"}}``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None:
            raise ConfigurationError(f"{source}: {key}: missing '=' and value")
        parts = [part.strip() for part in key.split(".")]
        if not all(parts):
            raise ConfigurationError(f"{source}: {key}: malformed key")
        node = nested
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"{source}: {'.'.join(parts[: depth + 1])}: is a value, not a section")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigurationError(f"{source}: {key}: is a section, not a value")
        node[parts[-1]] = value
    return nested


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error["loc"] if part != "__root__")
    return f"{location}: {error['msg']}" if location else error["msg"]


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Parse a flat dotted ``key=value`` file, apply overrides and validate."""
    flat: Dict[str, Any] = {}
    source = "config"
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        source = str(path)
        flat.update(dotenv_values(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = value
    nested = fold_dotted(flat, source)
    try:
        return RunConfig.parse_obj(nested)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: {_first_error(exc)}") from exc
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
