"""Command-line entry point: ``python -m svdh <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from . import __version__
from .config import RunConfig, Settings, get_settings, load_run_config
from .data.manifest import Manifest, Split, Task, load_manifest, standardize_target
from .data.synthetic import write_synthetic_dataset
from .ensemble.service import (
    StackMode,
    check_member_backbones,
    fit_stacker,
    predict_stacked,
    restandardize_members,
    stack_member_logits,
)
from .errors import ArtifactWriteError, ConfigurationError, ManifestError, OutputExistsError, SvdHError
from .evaluation.figures import plot_confusion, plot_scatter
from .evaluation.metrics import (
    agreement_report,
    classification_metrics,
    regression_report,
    regression_to_classification,
)
from .evaluation.service import Predictions, predict_checkpoint
from .explain.service import explain_cases
from .log import configure_logging
from .models.checkpoint import Checkpoint, build_model
from .models.spec import InitKind
from .schemas import RunRecord, StackReport
from .scoring.binning import SeverityBinning
from .scoring.sharp import MAX_TOTAL_SCORE
from .training.config import TrainTask
from .training.service import train
from .utils.hashing import hash_artifacts
from .utils.seeding import seed_everything
from .utils.time import utcnow

RUN_RECORD = "run.json"
RUN_LOG = "run.log"
VERSIONED_PACKAGES = ("torch", "torchvision", "numpy", "pandas", "scikit-learn", "pydantic", "Pillow", "matplotlib")


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat dotted key=value run configuration")
    common.add_argument("--seed", type=non_negative_int, help="root seed (overrides the config's seed)")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--desk-scale", action="store_true", default=None, help="reduced backbones, 64x64 images")
    common.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    parser = argparse.ArgumentParser(prog="svdh", description="SvdH radiograph severity scoring toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synthesize = commands.add_parser("synthesize", parents=[common], help="write synthetic phantoms + manifest")
    synthesize.add_argument("--count", type=positive_int, required=True)
    synthesize.add_argument("--size", type=positive_int, default=64, help="image side in pixels")
    synthesize.add_argument("--task", choices=[task.value for task in Task], default=Task.SVDH.value)

    pretrain = commands.add_parser("pretrain", parents=[common], help="bone-age pretraining")
    pretrain.add_argument("--manifest", type=Path)

    train_cmd = commands.add_parser("train", parents=[common], help="train an SvdH model")
    train_cmd.add_argument("--manifest", type=Path)
    train_cmd.add_argument("--checkpoint", type=Path, help="initialise the backbone from this checkpoint")

    evaluate = commands.add_parser("evaluate", parents=[common], help="metrics and figures for a checkpoint")
    evaluate.add_argument("--manifest", type=Path)
    evaluate.add_argument("--checkpoint", type=Path)

    stack = commands.add_parser("stack", parents=[common], help="fit and evaluate a 3-member stacker")
    stack.add_argument("--manifest", type=Path)
    stack.add_argument("--members", type=Path, nargs=3, metavar="CHECKPOINT")

    explain = commands.add_parser("explain", parents=[common], help="Grad-CAM overlays for TP/TN/FP/FN cases")
    explain.add_argument("--manifest", type=Path)
    explain.add_argument("--checkpoint", type=Path)

    agreement = commands.add_parser("agreement", parents=[common], help="inter-rater agreement of two score columns")
    agreement.add_argument("--scores", type=Path, required=True)
    agreement.add_argument("--columns", nargs=2, metavar="COLUMN")
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "desk_scale": "true" if args.desk_scale else None,
        "output_dir": str(args.out) if args.out else None,
    }
    if getattr(args, "manifest", None):
        overrides["data.manifest"] = str(args.manifest)
    checkpoint = getattr(args, "checkpoint", None)
    if checkpoint and args.command == "train":
        overrides["model.init"] = InitKind.CHECKPOINT.value
        overrides["model.checkpoint"] = str(checkpoint)
    elif checkpoint:
        overrides[f"{args.command}.checkpoint"] = str(checkpoint)
    if getattr(args, "members", None):
        overrides["ensemble.members"] = ",".join(str(member) for member in args.members)
    return overrides


def prepare_output_dir(out_dir: Path, force: bool) -> Path:
    if out_dir.exists() and not out_dir.is_dir():
        raise OutputExistsError(f"{out_dir} exists and is not a directory")
    if out_dir.is_dir() and any(out_dir.iterdir()) and not force:
        raise OutputExistsError(f"{out_dir} is not empty (use --force to write into it)")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactWriteError(f"cannot create {out_dir}: {exc}") from exc
    return out_dir


def library_versions() -> Dict[str, str]:
    versions = {"svdh": __version__}
    for package in VERSIONED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def _write_json(path: Path, payload: str) -> Path:
    try:
        path.write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {path}: {exc}") from exc
    return path


def _require(value: Optional[Path], key: str) -> Path:
    if value is None:
        raise ConfigurationError(f"{key} is required for this command")
    return value


def _load_manifest(config: RunConfig, task: Task) -> Manifest:
    return load_manifest(_require(config.data.manifest, "data.manifest"), task=task, check_images=config.data.check_images)


def _records(manifest: Manifest, split: Split):
    records = manifest.split(split)
    if not records:
        raise ManifestError(f"manifest has no {split.value} rows")
    return records


def _write_predictions(path: Path, predictions: Predictions, predicted: np.ndarray) -> Path:
    frame = pd.DataFrame({"id": predictions.ids, "true": predictions.truth, "predicted": predicted})
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _checkpoint_task(checkpoint: Checkpoint) -> TrainTask:
    return TrainTask(checkpoint.task)


# Each command returns the paths it wrote; run.json hashes them.


def cmd_synthesize(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    manifest_path, images = write_synthetic_dataset(out_dir, args.count, args.size, config.seed, args.task)
    return [manifest_path, *images]


def _run_training(
    config: RunConfig,
    settings: Settings,
    out_dir: Path,
    task_config,
    spec,
    checkpoint_name: str,
) -> List[Path]:
    manifest = _load_manifest(config, task_config.task.manifest_task)
    seed_everything(config.seed)
    model = build_model(spec, task=task_config.task.value)
    history_path = out_dir / "history.jsonl"
    result = train(
        model,
        manifest,
        task_config,
        policy=config.augment,
        binning=config.binning.binning(),
        device=settings.torch_device(),
        num_workers=settings.num_workers,
        history_path=history_path,
    )
    checkpoint_path = result.best_checkpoint.save(out_dir / checkpoint_name)
    return [checkpoint_path, history_path]


def cmd_pretrain(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    return _run_training(config, settings, out_dir, config.pretrain, config.pretrain_spec(), "pretrain.pt")


def cmd_train(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    return _run_training(config, settings, out_dir, config.train, config.train_spec(), "model.pt")


def _regression_outputs(
    predictions: Predictions,
    task: TrainTask,
    binning: SeverityBinning,
    out_dir: Path,
    prefix: str = "",
) -> List[Path]:
    report = regression_report(predictions.scores, predictions.truth)
    written = [_write_json(out_dir / f"{prefix}metrics.json", report.json(indent=2))]
    limit = MAX_TOTAL_SCORE if task is not TrainTask.BONE_AGE else float(max(predictions.truth.max(), 1.0))
    written.append(plot_scatter(predictions.scores, predictions.truth, out_dir / f"{prefix}scatter.png", limit=limit))
    if task is TrainTask.SVDH_REGRESSION:
        # The regression model doubles as a classifier through the severity bins.
        predicted_classes = regression_to_classification(predictions.scores, binning)
        true_classes = binning.classes_for(np.clip(predictions.truth, 0.0, MAX_TOTAL_SCORE))
        as_classes = classification_metrics(predicted_classes, true_classes, binning)
        written.append(_write_json(out_dir / f"{prefix}metrics_as_classification.json", as_classes.json(indent=2)))
        written.append(plot_confusion(as_classes.confusion, binning.labels(), out_dir / f"{prefix}confusion_as_classification.png"))
    return written


def cmd_evaluate(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    checkpoint = Checkpoint.load(_require(config.evaluate.checkpoint, "evaluate.checkpoint"))
    task = _checkpoint_task(checkpoint)
    records = _records(_load_manifest(config, task.manifest_task), config.evaluate.split)
    predictions = predict_checkpoint(
        checkpoint,
        records,
        batch_size=config.evaluate.batch_size,
        device=settings.torch_device(),
        num_workers=settings.num_workers,
    )
    binning = SeverityBinning(tuple(checkpoint.binning_edges)) if checkpoint.binning_edges else config.binning.binning()
    if task.is_classification:
        true_classes = binning.classes_for(np.clip(predictions.truth, 0.0, MAX_TOTAL_SCORE))
        report = classification_metrics(predictions.classes, true_classes, binning)
        written = [
            _write_json(out_dir / "metrics.json", report.json(indent=2)),
            plot_confusion(report.confusion, binning.labels(), out_dir / "confusion.png"),
            _write_predictions(out_dir / "predictions.csv", predictions, predictions.classes),
        ]
    else:
        written = _regression_outputs(predictions, task, binning, out_dir)
        written.append(_write_predictions(out_dir / "predictions.csv", predictions, predictions.scores))
    logger.info("Evaluated {} on {} {} images", checkpoint.task, len(records), config.evaluate.split.value)
    return written


def cmd_stack(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    section = config.ensemble
    if len(section.members) != 3:
        raise ConfigurationError(f"ensemble.members needs exactly 3 checkpoints, got {len(section.members)}")
    checkpoints = [Checkpoint.load(path) for path in section.members]
    check_member_backbones([ckpt.spec.backbone for ckpt in checkpoints], [str(path) for path in section.members])
    wanted = TrainTask.SVDH_CLASSIFICATION if section.mode.is_classification else TrainTask.SVDH_REGRESSION
    wrong = [str(path) for path, ckpt in zip(section.members, checkpoints) if ckpt.task != wanted.value]
    if wrong:
        raise ConfigurationError(f"ensemble.mode={section.mode.value} needs {wanted.value} members: {wrong}")

    manifest = _load_manifest(config, Task.SVDH)
    fit_records = _records(manifest, section.fit_split)
    eval_records = _records(manifest, section.eval_split)
    device = settings.torch_device()

    def member_predictions(records) -> List[Predictions]:
        return [predict_checkpoint(ckpt, records, device=device, num_workers=settings.num_workers) for ckpt in checkpoints]

    fit_preds = member_predictions(fit_records)
    eval_preds = member_predictions(eval_records)
    names = [str(path) for path in section.members]
    binning = config.binning.binning()
    written: List[Path] = []

    if section.mode is StackMode.REGRESSION:
        stats = manifest.target_stats
        spec = fit_stacker(
            restandardize_members([p.scores for p in fit_preds], stats),
            standardize_target(fit_preds[0].truth, stats),
            section.mode,
            section.stacker,
            members=names,
            target_stats=stats,
        )
        stacked = predict_stacked(spec, restandardize_members([p.scores for p in eval_preds], stats)).scores
        ensemble_report = regression_report(stacked, eval_preds[0].truth)
        member_reports = {name: regression_report(p.scores, p.truth) for name, p in zip(names, eval_preds)}
        written.append(plot_scatter(stacked, eval_preds[0].truth, out_dir / "scatter.png"))
    else:
        fit_truth = binning.classes_for(np.clip(fit_preds[0].truth, 0.0, MAX_TOTAL_SCORE))
        eval_truth = binning.classes_for(np.clip(eval_preds[0].truth, 0.0, MAX_TOTAL_SCORE))
        spec = fit_stacker(
            stack_member_logits([p.outputs for p in fit_preds]),
            fit_truth,
            section.mode,
            section.stacker,
            members=names,
        )
        stacked = predict_stacked(spec, stack_member_logits([p.outputs for p in eval_preds])).classes
        ensemble_report = classification_metrics(stacked, eval_truth, binning)
        member_reports = {name: classification_metrics(p.classes, eval_truth, binning) for name, p in zip(names, eval_preds)}
        written.append(plot_confusion(ensemble_report.confusion, binning.labels(), out_dir / "confusion.png"))

    written.append(spec.save(out_dir / "ensemble.json"))
    report = StackReport(
        mode=section.mode.value,
        fit_split=section.fit_split.value,
        eval_split=section.eval_split.value,
        ensemble=ensemble_report,
        members=member_reports,
    )
    written.append(_write_json(out_dir / "metrics.json", report.json(indent=2)))
    return written


def cmd_explain(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    checkpoint = Checkpoint.load(_require(config.explain.checkpoint, "explain.checkpoint"))
    records = _records(_load_manifest(config, _checkpoint_task(checkpoint).manifest_task), config.explain.split)
    result = explain_cases(
        checkpoint,
        records,
        out_dir,
        max_per_kind=config.explain.max_per_kind,
        alpha=config.explain.alpha,
        device=settings.torch_device(),
    )
    return result.written


def cmd_agreement(args: argparse.Namespace, config: RunConfig, settings: Settings, out_dir: Path) -> List[Path]:
    report = agreement_report(args.scores, args.columns)
    return [_write_json(out_dir / "agreement.json", report.json(indent=2))]


COMMANDS: Dict[str, Callable[..., List[Path]]] = {
    "synthesize": cmd_synthesize,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "stack": cmd_stack,
    "explain": cmd_explain,
    "agreement": cmd_agreement,
}


def run_command(args: argparse.Namespace, argv: Sequence[str], settings: Settings) -> Path:
    config = load_run_config(args.config, config_overrides(args))
    out_dir = prepare_output_dir(Path(config.output_dir), args.force)
    configure_logging(settings, log_file=out_dir / RUN_LOG)
    record = RunRecord(
        command=args.command,
        argv=list(argv),
        seed=config.seed,
        config=config.resolved(),
        started_at=utcnow(),
        versions=library_versions(),
    )
    if args.command == "synthesize":
        record.config["synthesize"] = {"count": args.count, "size": args.size, "task": args.task}
    logger.info("Running {} (seed {}) into {}", args.command, config.seed, out_dir)
    try:
        written = COMMANDS[args.command](args, config, settings, out_dir)
    finally:
        configure_logging(settings)
    record.finished_at = utcnow()
    record.artifacts = hash_artifacts(out_dir, written)
    return _write_json(out_dir / RUN_RECORD, record.json(indent=2))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
        configure_logging(settings)
        run_path = run_command(args, argv, settings)
    except (SvdHError, ValidationError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    logger.info("Wrote {}", run_path)
    return 0
