"""SvdH scoring arithmetic and severity binning."""

from .binning import DEFAULT_EDGES, NUM_CLASSES, SeverityBinning, score_to_class
from .sharp import (
    ErosionArea,
    ErosionEntry,
    Hand,
    JsnEntry,
    JsnJoint,
    SvdHScore,
    erosion_area_score,
    total_score,
)

__all__ = [
    "DEFAULT_EDGES",
    "NUM_CLASSES",
    "ErosionArea",
    "ErosionEntry",
    "Hand",
    "JsnEntry",
    "JsnJoint",
    "SeverityBinning",
    "SvdHScore",
    "erosion_area_score",
    "score_to_class",
    "total_score",
]
