"""Seed management: one root seed drives every random stream."""

from __future__ import annotations

import random
from typing import Sequence

import numpy as np
import torch


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def derive_rng(seed: int, *streams: int) -> np.random.Generator:
    """Independent numpy generator for a (seed, stream...) key."""
    key: Sequence[int] = (int(seed), *(int(s) for s in streams))
    return np.random.default_rng(list(key))


def torch_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator
