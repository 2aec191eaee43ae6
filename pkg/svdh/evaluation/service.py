"""Checkpoint inference over manifest records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch
from loguru import logger

from ..data.manifest import ImageRecord, destandardize_target
from ..errors import ConfigurationError
from ..models.checkpoint import Checkpoint
from ..scoring.binning import SeverityBinning
from ..training.dataset import RadiographDataset, predict_outputs


@dataclass(frozen=True)
class Predictions:
    ids: List[str]
    truth: np.ndarray
    outputs: np.ndarray
    task: str

    @property
    def is_classification(self) -> bool:
        return self.outputs.ndim == 2 and self.outputs.shape[1] > 1

    @property
    def scores(self) -> np.ndarray:
        if self.is_classification:
            raise ConfigurationError("classification predictions have no regression scores")
        return self.outputs.reshape(-1)

    @property
    def classes(self) -> np.ndarray:
        return self.outputs.argmax(axis=1)


def checkpoint_binning(checkpoint: Checkpoint) -> Optional[SeverityBinning]:
    if checkpoint.binning_edges is None:
        return None
    return SeverityBinning(tuple(checkpoint.binning_edges))


def predict_checkpoint(
    checkpoint: Checkpoint,
    records: Sequence[ImageRecord],
    batch_size: int = 16,
    device: str = "cpu",
    num_workers: int = 0,
) -> Predictions:
    """Run a saved model over ``records``.

    Regression outputs are destandardised into target units; classification
    outputs stay as logits.
    """
    if checkpoint.pixel_stats is None:
        raise ConfigurationError("checkpoint carries no pixel statistics")
    binning = checkpoint_binning(checkpoint)
    if binning is None and checkpoint.target_stats is None:
        raise ConfigurationError("checkpoint carries neither target statistics nor binning")
    model = checkpoint.build_model().to(device)
    dataset = RadiographDataset(
        records,
        checkpoint.pixel_stats,
        checkpoint.image_size,
        target_stats=None if binning is not None else checkpoint.target_stats,
        binning=binning,
        cache=False,
    )
    outputs = predict_outputs(model, dataset, batch_size, device, num_workers).to(torch.float64).numpy()
    if binning is None:
        outputs = destandardize_target(outputs, checkpoint.target_stats)
    logger.debug("Predicted {} records with {} ({})", len(records), checkpoint.spec.backbone.value, checkpoint.task)
    return Predictions(
        ids=[record.id for record in records],
        truth=np.asarray([record.target for record in records], dtype=np.float64),
        outputs=outputs,
        task=checkpoint.task,
    )
