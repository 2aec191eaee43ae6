"""Torch dataset over manifest records, plus batched inference."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from ..data.images import load_image
from ..data.manifest import ImageRecord, TargetStats, standardize_target
from ..errors import ArgumentError
from ..preprocess import AugmentPolicy, PixelStats, prepare_eval, prepare_train, resize
from ..scoring.binning import SeverityBinning
from ..utils.seeding import derive_rng


class RadiographDataset(Dataset):
    """Yields (image tensor, target, index).

    Regression targets are z-scored with ``target_stats``; classification
    targets are severity class indices. With ``augment=True`` each
    (seed, epoch, index) triple gets its own augmentation draw.
    """

    def __init__(
        self,
        records: Sequence[ImageRecord],
        pixel_stats: PixelStats,
        image_size: Sequence[int],
        target_stats: Optional[TargetStats] = None,
        binning: Optional[SeverityBinning] = None,
        policy: Optional[AugmentPolicy] = None,
        augment: bool = False,
        seed: int = 0,
        cache: bool = True,
    ):
        if target_stats is None and binning is None:
            raise ArgumentError("need target_stats (regression) or binning (classification)")
        self.records = list(records)
        self.pixel_stats = pixel_stats
        self.image_size = tuple(int(v) for v in image_size)
        self.target_stats = target_stats
        self.binning = binning
        self.policy = (policy or AugmentPolicy()).copy(update={"target_size": self.image_size})
        self.augment = augment
        self.seed = seed
        self.epoch = 0
        self._cache: Optional[Dict[int, torch.Tensor]] = {} if cache else None
        raw = np.asarray([record.target for record in self.records], dtype=np.float64)
        if binning is not None:
            self.targets = torch.as_tensor(binning.classes_for(raw), dtype=torch.long)
        else:
            self.targets = torch.as_tensor(standardize_target(raw, target_stats), dtype=torch.float32)

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.records)

    def _resized(self, index: int) -> torch.Tensor:
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        tensor = resize(load_image(self.records[index].image_path), self.image_size)
        if self._cache is not None:
            self._cache[index] = tensor
        return tensor

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor, int]:
        image = self._resized(index)
        if self.augment:
            rng = derive_rng(self.seed, self.epoch, index)
            tensor = prepare_train(image, self.policy, self.pixel_stats, rng)
        else:
            tensor = prepare_eval(image, self.pixel_stats, self.image_size)
        return tensor, self.targets[index], index


def epoch_order(length: int, seed: int, epoch: int) -> List[int]:
    """Shuffled train order for one epoch, keyed on the run seed."""
    # Stream 2**31 - 1 keeps the shuffle independent of per-image augmentation streams.
    return [int(i) for i in derive_rng(seed, epoch, 2**31 - 1).permutation(length)]


@torch.no_grad()
def predict_outputs(
    model: torch.nn.Module,
    dataset: RadiographDataset,
    batch_size: int = 16,
    device: str = "cpu",
    num_workers: int = 0,
) -> torch.Tensor:
    """Raw head outputs (N, width) in manifest order, on CPU."""
    was_training = model.training
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=num_workers)
    outputs = [model(images.to(device)).cpu() for images, _, _ in loader]
    model.train(was_training)
    return torch.cat(outputs, dim=0)
