"""Scatter and confusion-matrix figures."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import ArgumentError, ArtifactWriteError  # noqa: E402
from ..scoring.sharp import MAX_TOTAL_SCORE  # noqa: E402

DECILES = 10


def _save(fig, out_path: Union[str, Path]) -> Path:
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        # Fixed metadata keeps repeated renders byte-identical.
        fig.savefig(out_path, dpi=120, metadata={"Software": None})
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write figure {out_path}: {exc}") from exc
    finally:
        plt.close(fig)
    return out_path


def decile_summary(predicted: Sequence[float], truth: Sequence[float]):
    """Mean true score, mean and SD of predictions within each decile of the true score."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    order = np.argsort(truth, kind="stable")
    groups = [group for group in np.array_split(order, min(DECILES, truth.size)) if group.size]
    centres = np.array([truth[g].mean() for g in groups])
    means = np.array([predicted[g].mean() for g in groups])
    sds = np.array([predicted[g].std() for g in groups])
    return centres, means, sds


def plot_scatter(
    predicted: Sequence[float],
    truth: Sequence[float],
    out_path: Union[str, Path],
    title: Optional[str] = None,
    limit: float = MAX_TOTAL_SCORE,
) -> Path:
    """Predicted vs true with the identity line and per-decile mean +/- SD."""
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if predicted.shape != truth.shape or predicted.size == 0:
        raise ArgumentError("scatter needs equal, non-zero numbers of predictions and truths")
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(truth, predicted, s=8, alpha=0.5, color="tab:blue", label="images")
    upper = max(limit, float(truth.max()), float(predicted.max()))
    lower = min(0.0, float(truth.min()), float(predicted.min()))
    ax.plot([lower, upper], [lower, upper], "k--", linewidth=1, label="identity")
    centres, means, sds = decile_summary(predicted, truth)
    ax.errorbar(centres, means, yerr=sds, fmt="o-", color="tab:red", capsize=3, label="decile mean ± SD")
    ax.set_xlim(lower, upper)
    ax.set_ylim(lower, upper)
    ax.set_xlabel("True score")
    ax.set_ylabel("Predicted score")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_confusion(
    confusion: Sequence[Sequence[int]],
    labels: Sequence[str],
    out_path: Union[str, Path],
    title: Optional[str] = None,
) -> Path:
    """Confusion matrix shaded by row proportion, annotated with counts and proportions."""
    matrix = np.asarray(confusion, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != len(labels):
        raise ArgumentError(f"confusion {matrix.shape} does not match {len(labels)} labels")
    support = matrix.sum(axis=1, keepdims=True)
    proportions = np.divide(matrix, support, out=np.zeros(matrix.shape, dtype=np.float64), where=support > 0)
    fig, ax = plt.subplots(figsize=(7, 6))
    image = ax.imshow(proportions, cmap="Blues", vmin=0.0, vmax=1.0)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    for row in range(matrix.shape[0]):
        for col in range(matrix.shape[1]):
            colour = "white" if proportions[row, col] > 0.5 else "black"
            ax.text(
                col,
                row,
                f"{matrix[row, col]}\n{proportions[row, col]:.2f}",
                ha="center",
                va="center",
                fontsize=6,
                color=colour,
            )
    ticks = np.arange(len(labels))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("Predicted class")
    ax.set_ylabel("True class")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, out_path)
