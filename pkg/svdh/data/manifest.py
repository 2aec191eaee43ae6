"""Manifest CSV ingestion and target standardisation."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..errors import ConfigurationError, ManifestError

MANIFEST_COLUMNS = ("id", "image_path", "target", "split")


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class Task(str, Enum):
    SVDH = "svdh"
    BONE_AGE = "bone_age"


@dataclass(frozen=True)
class TargetStats:
    """Mean and SD of the training targets, used for z-scoring."""

    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise ConfigurationError(f"target sd must be positive, got {self.sd}")

    def as_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class ImageRecord:
    id: str
    image_path: Path
    target: float
    split: Split


@dataclass(frozen=True)
class Manifest:
    records: Tuple[ImageRecord, ...]
    task: Task
    target_stats: TargetStats

    def split(self, split: Union[Split, str]) -> List[ImageRecord]:
        wanted = Split(split)
        return [record for record in self.records if record.split is wanted]

    def __len__(self) -> int:
        return len(self.records)


def standardize_target(y, stats: TargetStats):
    if not stats.sd > 0:
        raise ConfigurationError(f"target sd must be positive, got {stats.sd}")
    return (y - stats.mean) / stats.sd


def destandardize_target(z, stats: TargetStats):
    if not stats.sd > 0:
        raise ConfigurationError(f"target sd must be positive, got {stats.sd}")
    return z * stats.sd + stats.mean


def compute_target_stats(records: Sequence[ImageRecord]) -> TargetStats:
    """Population mean/SD over the train split only."""
    train = [record.target for record in records if record.split is Split.TRAIN]
    if not train:
        raise ManifestError("no training rows")
    values = np.asarray(train, dtype=np.float64)
    sd = float(values.std())
    if not sd > 0:
        raise ManifestError("training targets have zero variance")
    return TargetStats(mean=float(values.mean()), sd=sd)


def load_manifest(
    path: Union[str, Path],
    task: Union[Task, str] = Task.SVDH,
    check_images: bool = True,
) -> Manifest:
    """Parse and validate an ``id,image_path,target,split`` manifest.

    Relative image paths resolve against the manifest's directory. Row numbers
    in errors are file line numbers (the header is line 1).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc

    missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
    if missing:
        raise ManifestError(f"missing column(s): {', '.join(missing)}", row=1)
    if tuple(frame.columns) != MANIFEST_COLUMNS:
        raise ManifestError(
            f"header must be exactly {','.join(MANIFEST_COLUMNS)}, got {','.join(frame.columns)}",
            row=1,
        )

    base = path.resolve().parent
    records: List[ImageRecord] = []
    seen_ids = set()
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2
        record_id = row.id.strip()
        if not record_id:
            raise ManifestError("empty id", row=line)
        if record_id in seen_ids:
            raise ManifestError(f"duplicate id {record_id!r}", row=line)
        seen_ids.add(record_id)

        try:
            target = float(row.target)
        except ValueError:
            raise ManifestError(f"target {row.target!r} is not a number", row=line) from None
        if not math.isfinite(target):
            raise ManifestError(f"target {row.target!r} is not finite", row=line)

        try:
            split = Split(row.split.strip())
        except ValueError:
            raise ManifestError(f"unknown split {row.split!r}", row=line) from None

        image_path = Path(row.image_path.strip())
        if not image_path.is_absolute():
            image_path = base / image_path
        if check_images and not (image_path.is_file() and os.access(image_path, os.R_OK)):
            raise ManifestError(f"unreadable image path {row.image_path!r}", row=line)

        records.append(ImageRecord(id=record_id, image_path=image_path, target=target, split=split))

    stats = compute_target_stats(records)
    manifest = Manifest(records=tuple(records), task=Task(task), target_stats=stats)
    logger.debug(
        "Loaded manifest {} ({} rows, train mean={:.3f} sd={:.3f})",
        path,
        len(records),
        stats.mean,
        stats.sd,
    )
    return manifest


def write_manifest(records: Iterable[ImageRecord], path: Union[str, Path]) -> Path:
    """Write records as a manifest CSV; image paths are stored relative when possible."""
    path = Path(path)
    base = path.resolve().parent
    rows = []
    for record in records:
        image_path = Path(record.image_path)
        try:
            image_path = image_path.resolve().relative_to(base)
        except ValueError:
            pass
        rows.append(
            {
                "id": record.id,
                "image_path": image_path.as_posix(),
                "target": repr(float(record.target)),
                "split": Split(record.split).value,
            }
        )
    frame = pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS))
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path
