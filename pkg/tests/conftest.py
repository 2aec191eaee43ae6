from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

# Ensure imports work when tests are launched from outside the repo root.
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

os.environ.setdefault("SVDH_LOG_LEVEL", "WARNING")
os.environ.setdefault("SVDH_LOG_JSON", "false")
os.environ.setdefault("SVDH_DEVICE", "cpu")
os.environ.setdefault("SVDH_NUM_WORKERS", "0")

import torch  # noqa: E402

from svdh.data.manifest import load_manifest  # noqa: E402
from svdh.data.synthetic import write_synthetic_dataset  # noqa: E402
from svdh.models.spec import Backbone, HeadKind, ModelSpec  # noqa: E402
from svdh.scoring.binning import SeverityBinning  # noqa: E402

torch.set_num_threads(max(1, min(4, os.cpu_count() or 1)))

DESK_SIDE = 64


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory) -> Path:
    out_dir = tmp_path_factory.mktemp("phantoms")
    write_synthetic_dataset(out_dir, count=64, side_px=DESK_SIDE, seed=7)
    return out_dir


@pytest.fixture(scope="session")
def synthetic_manifest_path(synthetic_dir: Path) -> Path:
    return synthetic_dir / "manifest.csv"


@pytest.fixture(scope="session")
def synthetic_manifest(synthetic_manifest_path: Path):
    return load_manifest(synthetic_manifest_path)


@pytest.fixture(scope="session")
def bone_age_manifest_path(tmp_path_factory) -> Path:
    out_dir = tmp_path_factory.mktemp("bone_age")
    manifest_path, _ = write_synthetic_dataset(out_dir, count=24, side_px=DESK_SIDE, seed=3, task="bone_age")
    return manifest_path


@pytest.fixture
def desk_spec():
    def _make(backbone: str = "resnet34", head: str = "regression", **kwargs) -> ModelSpec:
        return ModelSpec(backbone=Backbone(backbone), head=HeadKind(head), desk_scale=True, **kwargs)

    return _make


@pytest.fixture
def binning() -> SeverityBinning:
    return SeverityBinning()
