"""SGD training loop with best-validation checkpoint selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import torch
from loguru import logger
from torch import nn
from torch.utils.data import DataLoader

from ..data.images import load_image
from ..data.manifest import Manifest, Split, destandardize_target
from ..errors import ArtifactWriteError, ConfigurationError, ManifestError, NonFiniteLossError
from ..models.checkpoint import Checkpoint
from ..models.network import SeverityNet
from ..preprocess import AugmentPolicy, PixelStats, compute_pixel_stats
from ..schemas import EpochRecord
from ..scoring.binning import SeverityBinning
from ..utils.seeding import seed_everything
from ..utils.time import Stopwatch
from .config import TrainConfig
from .dataset import RadiographDataset, epoch_order, predict_outputs
from .losses import criterion_for


@dataclass
class TrainingResult:
    best_checkpoint: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        return self.best_checkpoint.epoch


def build_optimizer(model: nn.Module, config: TrainConfig) -> torch.optim.SGD:
    """Plain SGD over trainable parameters; weight decay applies to all of them."""
    parameters = [p for p in model.parameters() if p.requires_grad]
    if not parameters:
        raise ConfigurationError("model has no trainable parameters")
    return torch.optim.SGD(
        parameters,
        lr=config.learning_rate,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )


def _score_mae(outputs: torch.Tensor, targets: torch.Tensor, dataset: RadiographDataset) -> float:
    """MAE in score units (regression) or class units (classification)."""
    if dataset.binning is not None:
        predicted = outputs.argmax(dim=1).to(torch.float64)
        return float((predicted - targets.to(torch.float64)).abs().mean())
    stats = dataset.target_stats
    predicted = destandardize_target(outputs.reshape(-1).to(torch.float64), stats)
    truth = destandardize_target(targets.reshape(-1).to(torch.float64), stats)
    return float((predicted - truth).abs().mean())


def _append_history(path: Path, record: EpochRecord) -> None:
    try:
        with path.open("a", encoding="utf-8") as handle:
            handle.write(record.json() + "\n")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot append to {path}: {exc}") from exc


def train(
    model: SeverityNet,
    manifest: Manifest,
    config: TrainConfig,
    policy: Optional[AugmentPolicy] = None,
    pixel_stats: Optional[PixelStats] = None,
    binning: Optional[SeverityBinning] = None,
    device: str = "cpu",
    num_workers: int = 0,
    history_path: Optional[Union[str, Path]] = None,
) -> TrainingResult:
    """Run ``config.epochs`` passes and keep the epoch with the lowest validation loss."""
    train_records = manifest.split(Split.TRAIN)
    val_records = manifest.split(Split.VALIDATION)
    if not train_records:
        raise ManifestError("manifest has no train rows")
    if not val_records:
        raise ManifestError("manifest has no validation rows")
    if model.spec.head is not config.task.head:
        raise ConfigurationError(
            f"task {config.task.value} needs a {config.task.head.value} head, model has {model.spec.head.value}"
        )

    policy = policy or AugmentPolicy()
    image_size = tuple(policy.target_size)
    if config.task.is_classification:
        binning = binning or SeverityBinning()
        target_stats = None
    else:
        binning = None
        target_stats = manifest.target_stats
    if pixel_stats is None:
        pixel_stats = compute_pixel_stats((load_image(r.image_path) for r in train_records), image_size)
        logger.info("Pixel stats over {} train images: mean={:.4f} sd={:.4f}", len(train_records), pixel_stats.mean, pixel_stats.sd)

    seed_everything(config.seed)
    train_set = RadiographDataset(
        train_records,
        pixel_stats,
        image_size,
        target_stats=target_stats,
        binning=binning,
        policy=policy,
        augment=True,
        seed=config.seed,
    )
    val_set = RadiographDataset(
        val_records, pixel_stats, image_size, target_stats=target_stats, binning=binning
    )

    model.to(device)
    optimizer = build_optimizer(model, config)
    criterion = criterion_for(config)
    history: List[EpochRecord] = []
    best: Optional[Checkpoint] = None
    best_loss = math.inf
    if history_path is not None:
        history_path = Path(history_path)
        history_path.parent.mkdir(parents=True, exist_ok=True)
        history_path.write_text("", encoding="utf-8")

    for epoch in range(1, config.epochs + 1):
        stopwatch = Stopwatch()
        train_set.set_epoch(epoch)
        loader = DataLoader(
            train_set,
            batch_size=config.batch_size,
            sampler=epoch_order(len(train_set), config.seed, epoch),
            num_workers=num_workers,
        )
        model.train()
        batch_losses: List[float] = []
        epoch_outputs: List[torch.Tensor] = []
        epoch_targets: List[torch.Tensor] = []
        for batch_index, (images, targets, _) in enumerate(loader, start=1):
            images = images.to(device)
            targets = targets.to(device)
            outputs = model(images)
            loss = criterion(outputs, targets)
            if not torch.isfinite(loss):
                raise NonFiniteLossError(epoch, batch_index, loss.item())
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batch_losses.append(loss.item())
            epoch_outputs.append(outputs.detach().cpu())
            epoch_targets.append(targets.cpu())

        val_outputs = predict_outputs(model, val_set, config.batch_size, device, num_workers)
        val_loss = float(criterion(val_outputs, val_set.targets))
        if not math.isfinite(val_loss):
            raise NonFiniteLossError(epoch, 0, val_loss)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(batch_losses)),
            val_loss=val_loss,
            train_mae=_score_mae(torch.cat(epoch_outputs), torch.cat(epoch_targets), train_set),
            val_mae=_score_mae(val_outputs, val_set.targets, val_set),
            wall_seconds=stopwatch.elapsed(),
        )
        history.append(record)
        if history_path is not None:
            _append_history(history_path, record)
        logger.info(
            "Epoch {}/{} train_loss={:.4f} val_loss={:.4f} val_mae={:.3f} ({:.1f}s)",
            epoch,
            config.epochs,
            record.train_loss,
            record.val_loss,
            record.val_mae,
            record.wall_seconds,
        )
        # Strict comparison keeps the earliest epoch on ties.
        if val_loss < best_loss:
            best_loss = val_loss
            best = Checkpoint.from_model(
                model,
                config.task.value,
                target_stats=target_stats,
                pixel_stats=pixel_stats,
                image_size=image_size,
                binning_edges=tuple(binning.edges) if binning else None,
                epoch=epoch,
                extra={"val_loss": val_loss},
            )

    logger.info("Best epoch {} with val_loss={:.4f}", best.epoch, best_loss)
    return TrainingResult(best_checkpoint=best, history=history)
