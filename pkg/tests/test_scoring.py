from __future__ import annotations

import numpy as np
import pytest

from svdh.errors import ConfigurationError, ScoreRangeError, ScoreValidationError
from svdh.scoring.binning import DEFAULT_EDGES, SeverityBinning, score_to_class
from svdh.scoring.sharp import (
    ErosionArea,
    ErosionEntry,
    Hand,
    JsnEntry,
    JsnJoint,
    SvdHScore,
    erosion_area_score,
    total_score,
)


def test_erosion_area_score_sums_and_clamps():
    assert erosion_area_score(ErosionEntry(Hand.LEFT, ErosionArea.MCP2, (1, 1))) == 2
    assert erosion_area_score(ErosionEntry(Hand.LEFT, ErosionArea.MCP2, (2, 2, 1, 1))) == 5
    assert erosion_area_score(ErosionEntry(Hand.LEFT, ErosionArea.MCP2, ())) == 0


def test_erosion_component_outside_grades_is_named():
    with pytest.raises(ScoreValidationError, match="4"):
        ErosionEntry(Hand.RIGHT, ErosionArea.ULNA, (1, 4))


def test_jsn_grade_range():
    with pytest.raises(ScoreValidationError):
        JsnEntry(Hand.RIGHT, JsnJoint.MCP1, 5)


def test_total_score_examples():
    assert total_score(SvdHScore()) == 0
    score = SvdHScore(
        erosion_entries=(ErosionEntry(Hand.LEFT, ErosionArea.IP, (3, 3)),),
        jsn_entries=(JsnEntry(Hand.RIGHT, JsnJoint.RADIOCARPAL, 3),),
    )
    assert total_score(score) == 8


def test_total_score_maximum_is_280():
    score = SvdHScore(
        erosion_entries=tuple(ErosionEntry(h, a, (3, 3)) for h in Hand for a in ErosionArea),
        jsn_entries=tuple(JsnEntry(h, j, 4) for h in Hand for j in JsnJoint),
    )
    assert total_score(score) == 280


def test_duplicate_entries_rejected():
    score = SvdHScore(
        jsn_entries=(JsnEntry(Hand.LEFT, JsnJoint.CMC3, 1), JsnEntry(Hand.LEFT, JsnJoint.CMC3, 2)),
    )
    with pytest.raises(ScoreValidationError, match="duplicate"):
        total_score(score)


def test_raw_total_passthrough_and_range():
    assert total_score(SvdHScore.from_total(47.5)) == 47.5
    with pytest.raises(ScoreRangeError):
        total_score(SvdHScore.from_total(281))


def test_random_entry_sets_match_clamp_then_sum_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        erosion = []
        for hand in Hand:
            for area in ErosionArea:
                if rng.random() < 0.3:
                    erosion.append(ErosionEntry(hand, area, tuple(int(c) for c in rng.integers(1, 4, rng.integers(0, 4)))))
        jsn = [JsnEntry(h, j, int(rng.integers(0, 5))) for h in Hand for j in JsnJoint if rng.random() < 0.3]
        total = total_score(SvdHScore(tuple(erosion), tuple(jsn)))
        oracle = sum(min(sum(e.components), 5) for e in erosion) + sum(j.grade for j in jsn)
        assert total == oracle
        assert 0 <= total <= 280


def test_score_to_class_boundaries(binning):
    assert score_to_class(0, binning) == 0
    assert score_to_class(280, binning) == 9
    assert score_to_class(47, binning) == 6
    assert score_to_class(5, binning) == 1
    with pytest.raises(ScoreRangeError):
        score_to_class(-0.1, binning)
    with pytest.raises(ScoreRangeError):
        score_to_class(280.5, binning)


def test_binning_sweep_is_monotone_and_total(binning):
    totals = np.arange(0, 280.25, 0.25)
    classes = [score_to_class(t, binning) for t in totals]
    assert all(0 <= c <= 9 for c in classes)
    assert all(b >= a for a, b in zip(classes, classes[1:]))
    assert set(classes) == set(range(10))


def test_bin_midpoints_round_trip(binning):
    for k, midpoint in enumerate(binning.midpoints()):
        assert score_to_class(midpoint, binning) == k


def test_binning_labels():
    assert SeverityBinning().labels()[:2] == ["0-5", "5-10"]
    assert SeverityBinning().labels()[-1] == "180-280"


@pytest.mark.parametrize(
    "edges",
    [
        DEFAULT_EDGES[:-1],
        (1,) + DEFAULT_EDGES[1:],
        (0, 5, 5, 15, 20, 30, 45, 70, 110, 180, 280),
        (0, 10, 15, 20, 25, 30, 45, 70, 110, 180, 280),
    ],
)
def test_invalid_edges_rejected(edges):
    with pytest.raises(ConfigurationError):
        SeverityBinning(tuple(edges))
