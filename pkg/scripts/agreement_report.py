"""Print inter-rater agreement (PCC/MAE/RMSE) between two score columns of a CSV."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from loguru import logger

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from svdh.errors import SvdHError  # noqa: E402
from svdh.evaluation.metrics import agreement_report  # noqa: E402


def report(csv_path: Path, columns=None) -> int:
    try:
        result = agreement_report(csv_path, columns)
    except (SvdHError, OSError) as exc:
        logger.error("Agreement report failed: {}", exc)
        return 1
    print(result.json(indent=2))
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", type=Path)
    parser.add_argument("--columns", nargs=2, metavar="COLUMN")
    arguments = parser.parse_args()
    raise SystemExit(report(arguments.csv, arguments.columns))
