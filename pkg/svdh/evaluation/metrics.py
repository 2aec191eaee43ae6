"""Agreement metrics, severity-class conversion and Grad-CAM case selection."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.metrics import confusion_matrix

from ..errors import ArgumentError, UndefinedCorrelationError
from ..schemas import MetricsReport
from ..scoring.binning import SeverityBinning
from ..scoring.sharp import MAX_TOTAL_SCORE

HEALTHY_BELOW = 5.0
SEVERE_ABOVE = 200.0
CLOSE_ERROR = 10.0
GROSS_ERROR = 50.0
CASE_KINDS = ("TP", "TN", "FP", "FN")


class RegressionMetrics(NamedTuple):
    pcc: Optional[float]
    mae: float
    rmse: float


def _paired(predicted: Sequence[float], truth: Sequence[float]):
    x = np.asarray(predicted, dtype=np.float64).reshape(-1)
    y = np.asarray(truth, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ArgumentError(f"length mismatch: {x.size} predictions vs {y.size} truths")
    if x.size == 0:
        raise ArgumentError("metrics need at least one sample")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ArgumentError("metrics need finite values")
    return x, y


def pearson(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Sample PCC (n - 1 normalisation); None when either series is constant."""
    n = x.size
    if n < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    var_x = float(dx @ dx) / (n - 1)
    var_y = float(dy @ dy) / (n - 1)
    if var_x == 0.0 or var_y == 0.0:
        return None
    cov = float(dx @ dy) / (n - 1)
    return max(-1.0, min(1.0, cov / (math.sqrt(var_x) * math.sqrt(var_y))))


def regression_metrics(
    predicted: Sequence[float],
    truth: Sequence[float],
    strict: bool = True,
) -> RegressionMetrics:
    """PCC, MAE, RMSE.

    With ``strict`` an undefined PCC raises UndefinedCorrelationError (which
    carries MAE and RMSE); otherwise PCC comes back as None.
    """
    x, y = _paired(predicted, truth)
    error = x - y
    mae = float(np.abs(error).mean())
    rmse = float(math.sqrt(float((error * error).mean())))
    pcc = pearson(x, y)
    if pcc is None and strict:
        raise UndefinedCorrelationError("PCC is undefined for a constant series", mae=mae, rmse=rmse)
    return RegressionMetrics(pcc=pcc, mae=mae, rmse=rmse)


def regression_report(predicted: Sequence[float], truth: Sequence[float]) -> MetricsReport:
    metrics = regression_metrics(predicted, truth, strict=False)
    warning = None
    if metrics.pcc is None:
        warning = "PCC undefined (constant series)"
        logger.warning("PCC undefined for {} samples; reporting MAE/RMSE only", len(truth))
    return MetricsReport(
        kind="regression",
        n=len(np.asarray(truth).reshape(-1)),
        pcc=metrics.pcc,
        mae=metrics.mae,
        rmse=metrics.rmse,
        warning=warning,
    )


def _as_classes(values: Sequence[int], num_classes: int) -> np.ndarray:
    array = np.asarray(values)
    if array.size and not np.all(np.equal(np.mod(array, 1), 0)):
        raise ArgumentError("class indices must be integers")
    array = array.astype(np.int64).reshape(-1)
    if array.size and (array.min() < 0 or array.max() >= num_classes):
        raise ArgumentError(f"class indices must lie in [0, {num_classes - 1}]")
    return array


def balanced_accuracy(confusion: np.ndarray) -> float:
    """Mean recall over classes with at least one true sample."""
    support = confusion.sum(axis=1)
    present = support > 0
    recalls = np.diag(confusion)[present] / support[present]
    return float(recalls.mean())


def classification_metrics(
    predicted_classes: Sequence[int],
    true_classes: Sequence[int],
    binning: Optional[SeverityBinning] = None,
) -> MetricsReport:
    binning = binning or SeverityBinning()
    num_classes = binning.num_classes
    predicted = _as_classes(predicted_classes, num_classes)
    truth = _as_classes(true_classes, num_classes)
    x, y = _paired(predicted, truth)
    confusion = confusion_matrix(truth, predicted, labels=list(range(num_classes)))
    ordinal = regression_metrics(x, y, strict=False)
    warning = None
    if ordinal.pcc is None:
        warning = "PCC undefined (constant series)"
        logger.warning("Class-index PCC undefined; reporting accuracy, BA, MAE and RMSE")
    return MetricsReport(
        kind="classification",
        n=int(truth.size),
        pcc=ordinal.pcc,
        mae=ordinal.mae,
        rmse=ordinal.rmse,
        accuracy=float(np.trace(confusion) / confusion.sum()),
        balanced_accuracy=balanced_accuracy(confusion),
        confusion=confusion.astype(int).tolist(),
        labels=binning.labels(),
        warning=warning,
    )


def regression_to_classification(
    predicted_scores: Sequence[float],
    binning: Optional[SeverityBinning] = None,
) -> np.ndarray:
    """Clamp predictions into [0, 280] and bin them."""
    binning = binning or SeverityBinning()
    scores = np.clip(np.asarray(predicted_scores, dtype=np.float64), 0.0, MAX_TOTAL_SCORE)
    return binning.classes_for(scores)


def select_cam_cases(
    ids: Sequence[str],
    predicted_scores: Sequence[float],
    truth: Sequence[float],
) -> Dict[str, List[str]]:
    """Ids per case kind: TP/TN close calls at the extremes, FP/FN gross over/under-scores.

    TP and TN are ordered by smallest absolute error, FP and FN by largest.
    """
    predicted, actual = _paired(predicted_scores, truth)
    if len(ids) != predicted.size:
        raise ArgumentError(f"{len(ids)} ids for {predicted.size} predictions")
    error = predicted - actual
    close = np.abs(error) < CLOSE_ERROR
    masks = {
        "TP": (actual > SEVERE_ABOVE) & close,
        "TN": (actual < HEALTHY_BELOW) & close,
        "FP": error > GROSS_ERROR,
        "FN": error < -GROSS_ERROR,
    }
    cases: Dict[str, List[str]] = {}
    for kind in CASE_KINDS:
        indices = np.flatnonzero(masks[kind])
        key = np.abs(error[indices])
        order = np.argsort(key if kind in ("TP", "TN") else -key, kind="stable")
        cases[kind] = [ids[i] for i in indices[order]]
    return cases


def select_cam_cases_for_classes(
    ids: Sequence[str],
    predicted_classes: Sequence[int],
    true_classes: Sequence[int],
    binning: Optional[SeverityBinning] = None,
) -> Dict[str, List[str]]:
    """Heuristic: map classes to bin midpoints and reuse the regression thresholds."""
    binning = binning or SeverityBinning()
    midpoints = np.asarray(binning.midpoints())
    predicted = midpoints[_as_classes(predicted_classes, binning.num_classes)]
    actual = midpoints[_as_classes(true_classes, binning.num_classes)]
    return select_cam_cases(ids, predicted, actual)


def agreement_report(
    csv_path: Union[str, Path],
    columns: Optional[Sequence[str]] = None,
) -> MetricsReport:
    """Inter-rater agreement between two score columns of a CSV."""
    frame = pd.read_csv(csv_path)
    if columns is None:
        numeric = [name for name in frame.columns if pd.api.types.is_numeric_dtype(frame[name])]
        if len(numeric) < 2:
            raise ArgumentError(f"{csv_path} needs two numeric score columns, found {numeric}")
        columns = numeric[:2]
    if len(columns) != 2:
        raise ArgumentError(f"agreement needs exactly two columns, got {list(columns)}")
    missing = [name for name in columns if name not in frame.columns]
    if missing:
        raise ArgumentError(f"{csv_path} has no column(s) {missing}")
    pair = frame[list(columns)].apply(pd.to_numeric, errors="coerce")
    complete = pair.dropna()
    dropped = len(pair) - len(complete)
    if dropped:
        logger.warning("Dropped {} rows with missing scores from {}", dropped, csv_path)
    first, second = columns
    report = regression_report(complete[first].to_numpy(), complete[second].to_numpy())
    logger.info("Agreement {} vs {}: pcc={} mae={:.2f} rmse={:.2f}", first, second, report.pcc, report.mae, report.rmse)
    return report

