"""Ten-class severity binning of SvdH totals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, ScoreRangeError
from .sharp import MAX_TOTAL_SCORE

NUM_CLASSES = 10
DEFAULT_EDGES: Tuple[float, ...] = (0, 5, 10, 15, 20, 30, 45, 70, 110, 180, 280)


def validate_edges(edges: Sequence[float]) -> Tuple[float, ...]:
    """Check that edges describe 10 contiguous bins over [0, 280]."""
    values = tuple(float(edge) for edge in edges)
    if len(values) != NUM_CLASSES + 1:
        raise ConfigurationError(f"binning needs {NUM_CLASSES + 1} edges, got {len(values)}")
    if values[0] != 0.0 or values[-1] != MAX_TOTAL_SCORE:
        raise ConfigurationError("binning edges must start at 0 and end at 280")
    widths = [upper - lower for lower, upper in zip(values, values[1:])]
    if any(width <= 0 for width in widths):
        raise ConfigurationError("binning edges must be strictly increasing")
    if any(later < earlier for earlier, later in zip(widths, widths[1:])):
        raise ConfigurationError("bin widths must not shrink towards higher scores")
    return values


@dataclass(frozen=True)
class SeverityBinning:
    """Bin k covers [edges[k], edges[k+1]); the last bin is closed at 280."""

    edges: Tuple[float, ...] = DEFAULT_EDGES

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", validate_edges(self.edges))

    @property
    def num_classes(self) -> int:
        return len(self.edges) - 1

    def midpoints(self) -> List[float]:
        return [(lower + upper) / 2 for lower, upper in zip(self.edges, self.edges[1:])]

    def labels(self) -> List[str]:
        return [f"{lower:g}-{upper:g}" for lower, upper in zip(self.edges, self.edges[1:])]

    def classes_for(self, totals: Sequence[float]) -> np.ndarray:
        """Vectorised binning of already-clamped totals."""
        values = np.asarray(totals, dtype=np.float64)
        indices = np.searchsorted(np.asarray(self.edges), values, side="right") - 1
        return np.clip(indices, 0, self.num_classes - 1).astype(np.int64)


def score_to_class(total: float, binning: SeverityBinning = SeverityBinning()) -> int:
    """Return the severity class index of an SvdH total."""
    value = float(total)
    if not math.isfinite(value) or not 0.0 <= value <= MAX_TOTAL_SCORE:
        raise ScoreRangeError(f"total {total} is outside [0, 280]")
    return int(binning.classes_for([value])[0])
