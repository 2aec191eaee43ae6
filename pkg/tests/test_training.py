from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
from pydantic import ValidationError

from svdh.config import load_run_config
from svdh.data.manifest import load_manifest
from svdh.errors import ConfigurationError, ManifestError
from svdh.models import FreezeScheme, build_model, freeze_plan
from svdh.preprocess import AugmentPolicy, PixelStats
from svdh.training import LossKind, TrainConfig, TrainTask, build_optimizer, pretrain_defaults, train
from svdh.training.dataset import RadiographDataset, epoch_order
from svdh.utils.seeding import seed_everything

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
DESK_POLICY = AugmentPolicy(target_size=(64, 64))


def test_default_losses_follow_task():
    assert TrainConfig().loss is LossKind.MSE
    assert TrainConfig(task=TrainTask.SVDH_CLASSIFICATION).loss is LossKind.CROSS_ENTROPY
    assert pretrain_defaults().task is TrainTask.BONE_AGE
    assert pretrain_defaults().epochs == 50


def test_mismatched_loss_rejected():
    with pytest.raises(ValidationError):
        TrainConfig(task=TrainTask.SVDH_CLASSIFICATION, loss=LossKind.SMOOTH)
    with pytest.raises(ValidationError):
        TrainConfig(loss=LossKind.CROSS_ENTROPY)
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)


def test_sgd_step_matches_hand_update():
    layer = torch.nn.Linear(1, 1, bias=False)
    with torch.no_grad():
        layer.weight.fill_(2.0)
    optimizer = build_optimizer(layer, TrainConfig(learning_rate=0.1, weight_decay=0.01, momentum=0.9))

    # d/dw (w * 3)^2 = 18 w = 36; plus decay 0.01 * 2
    loss = layer(torch.tensor([[3.0]])).pow(2).sum()
    loss.backward()
    optimizer.step()
    assert float(layer.weight) == pytest.approx(2.0 - 0.1 * (36.0 + 0.02))


def test_optimizer_needs_trainable_parameters():
    layer = torch.nn.Linear(1, 1)
    layer.requires_grad_(False)
    with pytest.raises(ConfigurationError):
        build_optimizer(layer, TrainConfig())


def test_epoch_order_is_a_seeded_permutation():
    order = epoch_order(45, seed=7, epoch=1)
    assert sorted(order) == list(range(45))
    assert order == epoch_order(45, seed=7, epoch=1)
    assert order != epoch_order(45, seed=7, epoch=2)


def test_augmented_items_are_reproducible(synthetic_manifest):
    records = synthetic_manifest.split("train")[:4]
    kwargs = dict(target_stats=synthetic_manifest.target_stats, policy=DESK_POLICY, augment=True, seed=5)
    stats = PixelStats(mean=0.3, sd=0.2)
    first = RadiographDataset(records, stats, (64, 64), **kwargs)
    second = RadiographDataset(records, stats, (64, 64), **kwargs)
    first.set_epoch(2)
    second.set_epoch(2)
    assert torch.equal(first[3][0], second[3][0])
    assert float(first[3][1]) == pytest.approx((records[3].target - synthetic_manifest.target_stats.mean) / synthetic_manifest.target_stats.sd, rel=1e-5)


def test_train_requires_validation_rows(synthetic_manifest_path, desk_spec):
    lines = synthetic_manifest_path.read_text(encoding="utf-8").splitlines()
    kept = [lines[0]] + [line for line in lines[1:] if line.endswith(",train")]
    path = synthetic_manifest_path.parent / "train_only.csv"
    path.write_text("\n".join(kept) + "\n", encoding="utf-8")
    manifest = load_manifest(path)
    with pytest.raises(ManifestError, match="validation"):
        train(build_model(desk_spec()), manifest, TrainConfig(epochs=1), policy=DESK_POLICY)


def test_head_must_match_task(synthetic_manifest, desk_spec):
    with pytest.raises(ConfigurationError):
        train(
            build_model(desk_spec(head="classification")),
            synthetic_manifest,
            TrainConfig(epochs=1),
            policy=DESK_POLICY,
        )


def test_best_checkpoint_is_lowest_validation_loss(synthetic_manifest, desk_spec, tmp_path):
    model = build_model(desk_spec("resnet34", freeze=FreezeScheme.RBS_1))
    plan = freeze_plan(model.spec, model)
    frozen_before = {name: model.state_dict()[name].clone() for name in plan.frozen_parameter_names}
    history_path = tmp_path / "history.jsonl"

    result = train(
        model,
        synthetic_manifest,
        TrainConfig(epochs=3, batch_size=8, learning_rate=0.01, seed=1),
        policy=DESK_POLICY,
        history_path=history_path,
    )

    losses = [record.val_loss for record in result.history]
    assert [record.epoch for record in result.history] == [1, 2, 3]
    assert result.best_epoch == losses.index(min(losses)) + 1
    assert result.best_checkpoint.extra["val_loss"] == min(losses)
    assert result.best_checkpoint.target_stats == synthetic_manifest.target_stats
    for name, tensor in frozen_before.items():
        assert torch.equal(result.best_checkpoint.state_dict[name], tensor)
    rows = [json.loads(line) for line in history_path.read_text(encoding="utf-8").splitlines()]
    assert [row["epoch"] for row in rows] == [1, 2, 3]


def test_desk_recipe_halves_train_error(synthetic_manifest):
    config = load_run_config(CONFIG_DIR / "desk.conf")
    seed_everything(config.seed)
    result = train(build_model(config.train_spec()), synthetic_manifest, config.train, policy=config.augment)

    assert len(result.history) == 5
    assert result.history[-1].train_mae < 0.5 * result.history[0].train_mae
    assert all(record.val_loss >= 0 for record in result.history)


def test_classification_training_runs(synthetic_manifest, desk_spec):
    result = train(
        build_model(desk_spec("mobilenetv2", "classification")),
        synthetic_manifest,
        TrainConfig(task=TrainTask.SVDH_CLASSIFICATION, epochs=1, batch_size=8, seed=0),
        policy=DESK_POLICY,
    )
    assert result.best_checkpoint.binning_edges[-1] == 280
    assert result.best_checkpoint.target_stats is None
    assert result.best_checkpoint.state_dict["body.classifier.1.weight"].shape[0] == 10
