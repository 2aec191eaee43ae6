"""Metrics, figures and checkpoint inference."""

from .figures import plot_confusion, plot_scatter
from .metrics import (
    agreement_report,
    classification_metrics,
    regression_metrics,
    regression_report,
    regression_to_classification,
    select_cam_cases,
    select_cam_cases_for_classes,
)
from .service import Predictions, predict_checkpoint

__all__ = [
    "Predictions",
    "agreement_report",
    "classification_metrics",
    "plot_confusion",
    "plot_scatter",
    "predict_checkpoint",
    "regression_metrics",
    "regression_report",
    "regression_to_classification",
    "select_cam_cases",
    "select_cam_cases_for_classes",
]
