"""van der Heijde-modified Sharp scoring arithmetic for hands and wrists."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

from ..errors import ScoreRangeError, ScoreValidationError

EROSION_COMPONENT_GRADES = frozenset({1, 2, 3})
MAX_EROSION_PER_AREA = 5
MAX_JSN_GRADE = 4
MAX_TOTAL_SCORE = 280.0


class Hand(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class ErosionArea(str, Enum):
    """The 16 areas scored for erosion in each hand and wrist."""

    PIP2 = "pip2"
    PIP3 = "pip3"
    PIP4 = "pip4"
    PIP5 = "pip5"
    IP = "ip"
    MCP1 = "mcp1"
    MCP2 = "mcp2"
    MCP3 = "mcp3"
    MCP4 = "mcp4"
    MCP5 = "mcp5"
    FIRST_METACARPAL = "first_metacarpal"
    MULTANGULARS = "multangulars"
    SCAPHOID = "scaphoid"
    LUNATE = "lunate"
    RADIUS = "radius"
    ULNA = "ulna"


class JsnJoint(str, Enum):
    """The 15 joints scored for joint space narrowing in each hand and wrist."""

    PIP2 = "pip2"
    PIP3 = "pip3"
    PIP4 = "pip4"
    PIP5 = "pip5"
    MCP1 = "mcp1"
    MCP2 = "mcp2"
    MCP3 = "mcp3"
    MCP4 = "mcp4"
    MCP5 = "mcp5"
    CMC3 = "cmc3"
    CMC4 = "cmc4"
    CMC5 = "cmc5"
    TRAPEZIUM_SCAPHOID = "trapezium_scaphoid"
    CAPITATE_SCAPHOID_LUNATE = "capitate_scaphoid_lunate"
    RADIOCARPAL = "radiocarpal"


def _check_components(components: Sequence[int]) -> None:
    for component in components:
        if component not in EROSION_COMPONENT_GRADES:
            raise ScoreValidationError(
                f"erosion component {component!r} is not one of 1, 2, 3"
            )


@dataclass(frozen=True)
class ErosionEntry:
    """Discrete erosion events observed in one area of one hand."""

    hand: Hand
    area: ErosionArea
    components: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        _check_components(self.components)


@dataclass(frozen=True)
class JsnEntry:
    hand: Hand
    joint: JsnJoint
    grade: int = 0

    def __post_init__(self) -> None:
        if self.grade not in range(MAX_JSN_GRADE + 1):
            raise ScoreValidationError(f"JSN grade {self.grade!r} is outside 0-4")


@dataclass(frozen=True)
class SvdHScore:
    """Either itemised erosion/JSN entries or an aggregate reader total.

    Dataset labels are averages of two readers, so ``raw_total`` may be
    non-integer.
    """

    erosion_entries: Tuple[ErosionEntry, ...] = field(default_factory=tuple)
    jsn_entries: Tuple[JsnEntry, ...] = field(default_factory=tuple)
    raw_total: Optional[float] = None

    @classmethod
    def from_total(cls, total: float) -> "SvdHScore":
        return cls(raw_total=float(total))


def erosion_area_score(entry: ErosionEntry) -> int:
    """Return the clamped erosion score of one area (sum of events, max 5)."""
    _check_components(entry.components)
    return min(sum(entry.components), MAX_EROSION_PER_AREA)


def _check_unique(keys: Iterable[tuple], kind: str) -> None:
    seen = set()
    for key in keys:
        if key in seen:
            hand, site = key
            raise ScoreValidationError(
                f"duplicate {kind} entry for {hand.value} {site.value}"
            )
        seen.add(key)


def erosion_total(score: SvdHScore) -> int:
    _check_unique(((e.hand, e.area) for e in score.erosion_entries), "erosion")
    return sum(erosion_area_score(entry) for entry in score.erosion_entries)


def jsn_total(score: SvdHScore) -> int:
    _check_unique(((j.hand, j.joint) for j in score.jsn_entries), "JSN")
    for entry in score.jsn_entries:
        if entry.grade not in range(MAX_JSN_GRADE + 1):
            raise ScoreValidationError(f"JSN grade {entry.grade!r} is outside 0-4")
    return sum(entry.grade for entry in score.jsn_entries)


def total_score(score: SvdHScore) -> float:
    """Return the hand/wrist SvdH total in [0, 280]."""
    if score.raw_total is not None:
        total = float(score.raw_total)
        if not math.isfinite(total) or not 0.0 <= total <= MAX_TOTAL_SCORE:
            raise ScoreRangeError(f"raw total {total} is outside [0, 280]")
        return total
    return float(erosion_total(score) + jsn_total(score))


def all_sites() -> Tuple[Tuple[Hand, Enum], ...]:
    """Every scored site, erosion areas first, left hand before right."""
    sites = []
    for hand in Hand:
        sites.extend((hand, area) for area in ErosionArea)
        sites.extend((hand, joint) for joint in JsnJoint)
    return tuple(sites)
