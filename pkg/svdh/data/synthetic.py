"""Synthetic hand phantoms with exactly known SvdH totals.

Each phantom carries a fixed template of 2 x 31 joint sites (16 erosion areas
and 15 JSN joints per hand). Erosion is drawn as a bright notch and joint
space narrowing as a dark blob whose contrast grows with the grade, so image
appearance is monotone in the score by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from loguru import logger
from skimage.draw import disk, ellipse

from ..errors import ArgumentError
from ..scoring.sharp import (
    MAX_EROSION_PER_AREA,
    MAX_JSN_GRADE,
    ErosionArea,
    ErosionEntry,
    Hand,
    JsnEntry,
    JsnJoint,
    SvdHScore,
    all_sites,
    erosion_area_score,
    total_score,
)
from ..utils.seeding import derive_rng
from .images import save_png, to_uint8
from .manifest import ImageRecord, Split, Task, write_manifest

SITES = all_sites()
SITES_PER_HAND = len(SITES) // 2
GRID_COLUMNS = 6
GRID_ROWS = math.ceil(SITES_PER_HAND / GRID_COLUMNS)
MIN_SIDE_PX = 32

# Reference split proportions (2700 / 760 / 358 of 3818 images).
TRAIN_FRACTION = 2700 / 3818
VALIDATION_FRACTION = 760 / 3818
MAX_BONE_AGE_MONTHS = 228.0

BACKGROUND = 0.08
SOFT_TISSUE = 0.35
BONE = 0.6
EROSION_STEP = (0.97 - BONE) / MAX_EROSION_PER_AREA
JSN_STEP = (BONE - 0.15) / MAX_JSN_GRADE


@dataclass(frozen=True)
class PhantomGrades:
    """Per-site grade table of one phantom."""

    erosion_components: Dict[Tuple[Hand, ErosionArea], Tuple[int, ...]]
    jsn_grades: Dict[Tuple[Hand, JsnJoint], int]

    @classmethod
    def healthy(cls) -> "PhantomGrades":
        return cls(
            erosion_components={(h, a): () for h in Hand for a in ErosionArea},
            jsn_grades={(h, j): 0 for h in Hand for j in JsnJoint},
        )

    @classmethod
    def maximal(cls) -> "PhantomGrades":
        return cls(
            erosion_components={(h, a): (3, 2) for h in Hand for a in ErosionArea},
            jsn_grades={(h, j): MAX_JSN_GRADE for h in Hand for j in JsnJoint},
        )

    @classmethod
    def random(cls, rng: np.random.Generator) -> "PhantomGrades":
        # Beta(0.7, 2) skews towards mild disease, as in clinical cohorts.
        severity = float(rng.beta(0.7, 2.0))
        erosion = {}
        for hand in Hand:
            for area in ErosionArea:
                events = int(rng.binomial(3, severity))
                erosion[(hand, area)] = tuple(int(c) for c in rng.integers(1, 4, size=events))
        jsn = {
            (hand, joint): int(rng.binomial(MAX_JSN_GRADE, severity))
            for hand in Hand
            for joint in JsnJoint
        }
        return cls(erosion_components=erosion, jsn_grades=jsn)

    def to_score(self) -> SvdHScore:
        return SvdHScore(
            erosion_entries=tuple(
                ErosionEntry(hand=hand, area=area, components=components)
                for (hand, area), components in self.erosion_components.items()
            ),
            jsn_entries=tuple(
                JsnEntry(hand=hand, joint=joint, grade=grade)
                for (hand, joint), grade in self.jsn_grades.items()
            ),
        )

    def site_grade(self, hand: Hand, site) -> int:
        if isinstance(site, ErosionArea):
            entry = ErosionEntry(hand=hand, area=site, components=self.erosion_components[(hand, site)])
            return erosion_area_score(entry)
        return self.jsn_grades[(hand, site)]


@dataclass(frozen=True)
class SyntheticSet:
    images: np.ndarray
    totals: np.ndarray
    grades: Tuple[PhantomGrades, ...]


def _site_centres(side_px: int) -> List[Tuple[float, float]]:
    half = side_px / 2
    cell_w = half / GRID_COLUMNS
    cell_h = side_px / GRID_ROWS
    centres = []
    for index, (hand, _) in enumerate(SITES):
        local = index % SITES_PER_HAND
        row, col = divmod(local, GRID_COLUMNS)
        x0 = 0.0 if hand is Hand.LEFT else half
        centres.append(((row + 0.5) * cell_h, x0 + (col + 0.5) * cell_w))
    return centres


def draw_phantom(grades: PhantomGrades, side_px: int, rng: np.random.Generator) -> np.ndarray:
    """Render one phantom as a uint8 grid."""
    if side_px < MIN_SIDE_PX:
        raise ArgumentError(f"side_px must be at least {MIN_SIDE_PX}, got {side_px}")
    shape = (side_px, side_px)
    pixels = np.full(shape, BACKGROUND, dtype=np.float64)
    half = side_px / 2
    for x0 in (0.0, half):
        rr, cc = ellipse(side_px / 2, x0 + half / 2, side_px * 0.48, half * 0.48, shape=shape)
        pixels[rr, cc] = SOFT_TISSUE

    radius = max(1.0, 0.38 * min(half / GRID_COLUMNS, side_px / GRID_ROWS))
    for (hand, site), centre in zip(SITES, _site_centres(side_px)):
        rr, cc = disk(centre, radius, shape=shape)
        pixels[rr, cc] = BONE
        grade = grades.site_grade(hand, site)
        if grade == 0:
            continue
        rr, cc = disk(centre, max(1.0, radius * 0.7), shape=shape)
        if isinstance(site, ErosionArea):
            pixels[rr, cc] = BONE + EROSION_STEP * grade
        else:
            pixels[rr, cc] = BONE - JSN_STEP * grade

    pixels += rng.normal(0.0, 0.01, size=shape)
    return to_uint8(pixels)


def generate_synthetic(count: int, side_px: int, seed: int) -> SyntheticSet:
    """Generate ``count`` phantoms; identical for a fixed seed."""
    if count < 1:
        raise ArgumentError(f"count must be at least 1, got {count}")
    if side_px < MIN_SIDE_PX:
        raise ArgumentError(f"side_px must be at least {MIN_SIDE_PX}, got {side_px}")
    images = np.empty((count, side_px, side_px), dtype=np.uint8)
    totals = np.empty(count, dtype=np.float64)
    grades: List[PhantomGrades] = []
    for index in range(count):
        rng = derive_rng(seed, index)
        table = PhantomGrades.random(rng)
        images[index] = draw_phantom(table, side_px, rng)
        totals[index] = total_score(table.to_score())
        grades.append(table)
    return SyntheticSet(images=images, totals=totals, grades=tuple(grades))


def bone_age_months(totals: np.ndarray) -> np.ndarray:
    """Monotone stand-in bone age (months) for pretraining on phantoms."""
    return np.asarray(totals, dtype=np.float64) / 280.0 * MAX_BONE_AGE_MONTHS


def assign_splits(count: int) -> List[Split]:
    """Deterministic train/validation/test assignment in the 2700 / 760 / 358 proportions."""
    n_train = int(round(count * TRAIN_FRACTION))
    n_val = int(round(count * VALIDATION_FRACTION))
    if count >= 2:
        n_train = max(1, min(n_train, count - 1))
        n_val = max(1, min(n_val, count - n_train))
    else:
        n_train, n_val = count, 0
    n_test = count - n_train - n_val
    return [Split.TRAIN] * n_train + [Split.VALIDATION] * n_val + [Split.TEST] * n_test


def write_synthetic_dataset(
    out_dir: Union[str, Path],
    count: int,
    side_px: int,
    seed: int,
    task: Union[Task, str] = Task.SVDH,
    manifest_name: str = "manifest.csv",
) -> Tuple[Path, List[Path]]:
    """Write phantom PNGs plus a manifest; returns (manifest path, image paths)."""
    out_dir = Path(out_dir)
    task = Task(task)
    dataset = generate_synthetic(count, side_px, seed)
    targets = dataset.totals if task is Task.SVDH else bone_age_months(dataset.totals)
    image_dir = out_dir / "images"
    records: List[ImageRecord] = []
    written: List[Path] = []
    for index, (pixels, target, split) in enumerate(zip(dataset.images, targets, assign_splits(count))):
        record_id = f"phantom-{index:05d}"
        path = save_png(pixels, image_dir / f"{record_id}.png")
        written.append(path)
        records.append(ImageRecord(id=record_id, image_path=path, target=float(target), split=split))
    manifest_path = write_manifest(records, out_dir / manifest_name)
    logger.info("Wrote {} phantoms ({}px, task={}) to {}", count, side_px, task.value, out_dir)
    return manifest_path, written

