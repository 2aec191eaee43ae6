from __future__ import annotations

from pathlib import Path

import pytest

from svdh.data.manifest import (
    ImageRecord,
    Split,
    TargetStats,
    destandardize_target,
    load_manifest,
    standardize_target,
    write_manifest,
)
from svdh.errors import ConfigurationError, ManifestError


def _write_csv(path: Path, rows) -> Path:
    lines = ["id,image_path,target,split"] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_target_stats_use_training_rows_only(tmp_path):
    path = _write_csv(
        tmp_path / "manifest.csv",
        [
            ("a", "a.png", 10, "train"),
            ("b", "b.png", 20, "train"),
            ("c", "c.png", 15, "validation"),
            ("d", "d.png", 30, "test"),
        ],
    )
    manifest = load_manifest(path, check_images=False)

    assert len(manifest) == 4
    assert manifest.target_stats.mean == pytest.approx(15.0)
    assert manifest.target_stats.sd == pytest.approx(5.0)
    assert [r.id for r in manifest.split("validation")] == ["c"]
    assert manifest.records[0].image_path == tmp_path.resolve() / "a.png"


def test_no_training_rows(tmp_path):
    path = _write_csv(tmp_path / "manifest.csv", [("a", "a.png", 10, "validation")])
    with pytest.raises(ManifestError, match="no training rows"):
        load_manifest(path, check_images=False)


def test_duplicate_id_reports_row(tmp_path):
    path = _write_csv(
        tmp_path / "manifest.csv",
        [("a", "a.png", 10, "train"), ("b", "b.png", 20, "train"), ("a", "c.png", 5, "test")],
    )
    with pytest.raises(ManifestError) as excinfo:
        load_manifest(path, check_images=False)
    assert excinfo.value.row == 4
    assert "duplicate id" in str(excinfo.value)


def test_unknown_split_and_missing_image(tmp_path):
    path = _write_csv(tmp_path / "bad_split.csv", [("a", "a.png", 10, "holdout")])
    with pytest.raises(ManifestError, match="unknown split"):
        load_manifest(path, check_images=False)

    path = _write_csv(tmp_path / "missing.csv", [("a", "a.png", 10, "train")])
    with pytest.raises(ManifestError, match="row 2"):
        load_manifest(path)


def test_missing_column(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("id,image_path,split\na,a.png,train\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="target"):
        load_manifest(path, check_images=False)


def test_standardize_target_examples():
    stats = TargetStats(mean=15.0, sd=5.0)
    assert standardize_target(15.0, stats) == 0.0
    assert standardize_target(20.0, stats) == 1.0
    assert standardize_target(47.0, stats) == pytest.approx(6.4)
    assert destandardize_target(6.4, stats) == pytest.approx(47.0)


def test_non_positive_sd_rejected():
    with pytest.raises(ConfigurationError):
        TargetStats(mean=0.0, sd=0.0)


def test_write_then_load_keeps_records(tmp_path):
    records = [
        ImageRecord("x1", tmp_path / "images" / "x1.png", 12.5, Split.TRAIN),
        ImageRecord("x2", tmp_path / "images" / "x2.png", 40.0, Split.TRAIN),
        ImageRecord("x3", tmp_path / "images" / "x3.png", 0.0, Split.TEST),
    ]
    path = write_manifest(records, tmp_path / "manifest.csv")
    assert "images/x1.png" in path.read_text(encoding="utf-8")

    loaded = load_manifest(path, check_images=False)
    assert [(r.id, r.target, r.split) for r in loaded.records] == [(r.id, r.target, r.split) for r in records]
