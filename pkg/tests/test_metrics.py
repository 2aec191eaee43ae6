from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from svdh.errors import ArgumentError, UndefinedCorrelationError
from svdh.evaluation import (
    agreement_report,
    classification_metrics,
    plot_confusion,
    plot_scatter,
    regression_metrics,
    regression_report,
    regression_to_classification,
    select_cam_cases,
    select_cam_cases_for_classes,
)


def test_identity_predictions():
    metrics = regression_metrics([1.0, 5.0, 9.0], [1.0, 5.0, 9.0])
    assert metrics.pcc == pytest.approx(1.0)
    assert metrics.mae == 0.0
    assert metrics.rmse == 0.0


def test_constant_predictions_leave_pcc_undefined():
    with pytest.raises(UndefinedCorrelationError) as excinfo:
        regression_metrics([2, 2, 2], [1, 2, 3])
    assert excinfo.value.mae == pytest.approx(2 / 3)
    assert excinfo.value.rmse == pytest.approx(math.sqrt(2 / 3))

    report = regression_report([2, 2, 2], [1, 2, 3])
    assert report.pcc is None
    assert report.warning
    assert report.rmse == pytest.approx(0.8165, abs=1e-4)


def test_pcc_is_affine_invariant():
    rng = np.random.default_rng(0)
    truth = rng.uniform(0, 280, 50)
    predicted = truth + rng.normal(0, 20, 50)
    base = regression_metrics(predicted, truth).pcc
    assert regression_metrics(3.0 * predicted + 7.0, truth).pcc == pytest.approx(base)
    assert regression_metrics(predicted, truth).pcc == pytest.approx(np.corrcoef(predicted, truth)[0, 1])


def test_mismatched_lengths_rejected():
    with pytest.raises(ArgumentError):
        regression_metrics([1.0, 2.0], [1.0])
    with pytest.raises(ArgumentError):
        regression_metrics([], [])


def _reference_regression(predicted, truth):
    n = len(predicted)
    mean_p = sum(predicted) / n
    mean_t = sum(truth) / n
    cov = sum((p - mean_p) * (t - mean_t) for p, t in zip(predicted, truth))
    var_p = sum((p - mean_p) ** 2 for p in predicted)
    var_t = sum((t - mean_t) ** 2 for t in truth)
    pcc = cov / math.sqrt(var_p * var_t)
    mae = sum(abs(p - t) for p, t in zip(predicted, truth)) / n
    rmse = math.sqrt(sum((p - t) ** 2 for p, t in zip(predicted, truth)) / n)
    return pcc, mae, rmse


def _reference_classification(predicted, truth):
    accuracy = sum(p == t for p, t in zip(predicted, truth)) / len(truth)
    recalls = []
    for k in sorted(set(truth)):
        rows = [p for p, t in zip(predicted, truth) if t == k]
        recalls.append(sum(p == k for p in rows) / len(rows))
    return accuracy, sum(recalls) / len(recalls)


def test_metrics_match_brute_force_reference():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        truth = rng.uniform(0, 280, n)
        predicted = truth + rng.normal(0, rng.uniform(1, 60), n)
        metrics = regression_metrics(predicted, truth)
        pcc, mae, rmse = _reference_regression(predicted.tolist(), truth.tolist())
        assert metrics.pcc == pytest.approx(pcc, abs=1e-9)
        assert metrics.mae == pytest.approx(mae, abs=1e-9)
        assert metrics.rmse == pytest.approx(rmse, abs=1e-9)
        assert metrics.rmse >= metrics.mae

        true_classes = rng.integers(0, 10, n)
        predicted_classes = np.clip(true_classes + rng.integers(-2, 3, n), 0, 9)
        report = classification_metrics(predicted_classes, true_classes)
        accuracy, balanced = _reference_classification(predicted_classes.tolist(), true_classes.tolist())
        assert report.accuracy == pytest.approx(accuracy, abs=1e-9)
        assert report.balanced_accuracy == pytest.approx(balanced, abs=1e-9)

        on_indices = regression_metrics(predicted_classes, true_classes, strict=False)
        assert (report.pcc, report.mae, report.rmse) == (on_indices.pcc, on_indices.mae, on_indices.rmse)


def test_balanced_accuracy_equals_accuracy_for_uniform_truth():
    truth = [0, 0, 1, 1, 2, 2]
    for predicted in itertools.product(range(3), repeat=len(truth)):
        report = classification_metrics(predicted, truth)
        assert report.balanced_accuracy == pytest.approx(report.accuracy, abs=1e-12)

    rng = np.random.default_rng(6)
    truth = np.repeat(np.arange(10), 3)
    for _ in range(50):
        report = classification_metrics(rng.integers(0, 10, truth.size), truth)
        assert report.balanced_accuracy == pytest.approx(report.accuracy, abs=1e-12)


def test_perfect_classification():
    report = classification_metrics(list(range(10)), list(range(10)))
    assert report.accuracy == 1.0
    assert report.balanced_accuracy == 1.0
    assert report.mae == 0.0
    assert len(report.confusion) == 10


def test_balanced_accuracy_ignores_absent_classes():
    report = classification_metrics([0, 1, 1, 1], [0, 0, 1, 1])
    assert report.confusion[0][:2] == [1, 1]
    assert report.confusion[1][:2] == [0, 2]
    assert report.accuracy == pytest.approx(0.75)
    assert report.balanced_accuracy == pytest.approx(0.75)


def test_shift_by_one_class():
    truth = [0, 3, 5, 8]
    report = classification_metrics([t + 1 for t in truth], truth)
    assert report.accuracy == 0.0
    assert report.mae == 1.0


def test_class_out_of_range():
    with pytest.raises(ArgumentError):
        classification_metrics([10], [0])


def test_regression_to_classification_clamps():
    assert regression_to_classification([-5.0, 47.0, 300.0, 4.99]).tolist() == [0, 6, 9, 0]


def test_cam_case_selection():
    ids = ["a", "b", "c", "d", "e", "f", "g"]
    truth = [2.0, 1.0, 240.0, 210.0, 20.0, 150.0, 100.0]
    predicted = [9.0, 1.5, 235.0, 150.0, 90.0, 50.0, 110.0]
    cases = select_cam_cases(ids, predicted, truth)

    assert list(cases) == ["TP", "TN", "FP", "FN"]
    assert cases["TN"] == ["b", "a"]
    assert cases["TP"] == ["c"]
    assert cases["FP"] == ["e"]
    assert cases["FN"] == ["f", "d"]


def test_cam_case_selection_for_classes():
    cases = select_cam_cases_for_classes(["x", "y", "z"], [0, 9, 9], [0, 9, 0])
    assert cases["TN"] == ["x"]
    assert cases["TP"] == ["y"]
    assert cases["FP"] == ["z"]
    assert cases["FN"] == []


def test_agreement_report_skips_missing_rows(tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("id,reader_a,reader_b\np1,10,12\np2,40,38\np3,,50\np4,100,90\n", encoding="utf-8")
    report = agreement_report(path)
    assert report.n == 3
    assert report.mae == pytest.approx((2 + 2 + 10) / 3)

    named = agreement_report(path, columns=["reader_b", "reader_a"])
    assert named.rmse == pytest.approx(report.rmse)
    with pytest.raises(ArgumentError):
        agreement_report(path, columns=["reader_a", "reader_c"])


def test_figures_are_written(tmp_path):
    truth = np.linspace(0, 280, 40)
    scatter = plot_scatter(truth + 5.0, truth, tmp_path / "scatter.png", title="desk")
    report = classification_metrics([0, 1, 1, 1], [0, 0, 1, 1])
    confusion = plot_confusion(report.confusion, report.labels, tmp_path / "confusion.png")
    for path in (scatter, confusion):
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    with pytest.raises(ArgumentError):
        plot_confusion([[1, 0], [0, 1]], ["a"], tmp_path / "bad.png")
