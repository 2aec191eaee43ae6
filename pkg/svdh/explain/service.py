"""TP/TN/FP/FN exemplar overlays for a trained checkpoint."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
from loguru import logger

from ..data.images import load_image
from ..data.manifest import ImageRecord
from ..errors import ArtifactWriteError
from ..evaluation.metrics import CASE_KINDS, select_cam_cases, select_cam_cases_for_classes
from ..evaluation.service import checkpoint_binning, predict_checkpoint
from ..models.checkpoint import Checkpoint
from ..preprocess import prepare_eval, resize
from ..schemas import CamCaseOut, CamReport
from ..scoring.sharp import MAX_TOTAL_SCORE
from .gradcam import grad_cam
from .overlay import DEFAULT_ALPHA, render_overlay

REPORT_NAME = "cam_report.json"


@dataclass
class ExplainResult:
    report: CamReport
    report_path: Path
    written: List[Path]


def explain_cases(
    checkpoint: Checkpoint,
    records: Sequence[ImageRecord],
    out_dir: Union[str, Path],
    max_per_kind: int = 1,
    alpha: float = DEFAULT_ALPHA,
    batch_size: int = 16,
    device: str = "cpu",
) -> ExplainResult:
    out_dir = Path(out_dir)
    predictions = predict_checkpoint(checkpoint, records, batch_size=batch_size, device=device)
    binning = checkpoint_binning(checkpoint)
    by_id: Dict[str, int] = {record_id: i for i, record_id in enumerate(predictions.ids)}

    if binning is not None:
        true_classes = binning.classes_for(np.clip(predictions.truth, 0.0, MAX_TOTAL_SCORE))
        cases = select_cam_cases_for_classes(predictions.ids, predictions.classes, true_classes, binning)
        predicted_values = predictions.classes.astype(np.float64)
        true_values = true_classes.astype(np.float64)
    else:
        cases = select_cam_cases(predictions.ids, predictions.scores, predictions.truth)
        predicted_values = predictions.scores
        true_values = predictions.truth

    model = checkpoint.build_model().to(device)
    report = CamReport(task=checkpoint.task, heuristic=binning is not None)
    written: List[Path] = []
    for kind in CASE_KINDS:
        chosen = cases[kind][:max_per_kind]
        if not chosen:
            report.empty_kinds.append(kind)
            logger.warning("No {} exemplar among {} images", kind, len(records))
            continue
        for record_id in chosen:
            index = by_id[record_id]
            pixels = load_image(records[index].image_path)
            tensor = prepare_eval(pixels, checkpoint.pixel_stats, checkpoint.image_size)
            heatmap = grad_cam(model, tensor)
            background = resize(pixels, checkpoint.image_size)[0].numpy()
            path = render_overlay(background, heatmap.values, out_dir / "overlays" / f"{kind}-{record_id}.png", alpha)
            written.append(path)
            report.cases.append(
                CamCaseOut(
                    kind=kind,
                    id=record_id,
                    true=float(true_values[index]),
                    predicted=float(predicted_values[index]),
                    overlay_path=path.relative_to(out_dir).as_posix(),
                )
            )

    report_path = out_dir / REPORT_NAME
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path.write_text(report.json(indent=2), encoding="utf-8")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {report_path}: {exc}") from exc
    written.append(report_path)
    logger.info("Wrote {} Grad-CAM overlays to {}", len(report.cases), out_dir)
    return ExplainResult(report=report, report_path=report_path, written=written)
