from __future__ import annotations

import pytest
import torch

from svdh.data.manifest import load_manifest
from svdh.errors import CheckpointIncompatibleError, ConfigurationError
from svdh.models import (
    Backbone,
    Checkpoint,
    FreezeScheme,
    HeadKind,
    InitKind,
    ModelSpec,
    SeverityNet,
    build_model,
    freeze_plan,
    transfer_weights,
    validate_spec,
)
from svdh.preprocess import AugmentPolicy
from svdh.training import TrainConfig, TrainTask, train
from svdh.utils.seeding import seed_everything

PAIRINGS = [
    ("resnet34", "none"),
    ("resnet34", "RBs-1"),
    ("resnet34", "RBs-2"),
    ("resnet50", "RBs-1"),
    ("resnet50", "RBs-2"),
    ("mobilenetv2", "none"),
    ("mobilenetv2", "IRBs-2"),
    ("mobilenetv2", "IRBs-3"),
]


def _batch(n: int, side: int = 64) -> torch.Tensor:
    return torch.randn(n, 1, side, side, generator=torch.Generator().manual_seed(n))


def test_full_size_resnet50_regression_shape():
    model = build_model(ModelSpec(backbone=Backbone.RESNET50))
    model.eval()
    with torch.no_grad():
        assert model(_batch(2)).shape == (2, 1)


@pytest.mark.parametrize("backbone", ["resnet34", "resnet50", "mobilenetv2"])
@pytest.mark.parametrize("head,width", [("regression", 1), ("classification", 10)])
def test_desk_output_shapes(desk_spec, backbone, head, width):
    model = build_model(desk_spec(backbone, head))
    model.eval()
    with torch.no_grad():
        assert model(_batch(3)).shape == (3, width)


def test_invalid_pairings_rejected():
    with pytest.raises(ConfigurationError):
        validate_spec(ModelSpec(backbone=Backbone.RESNET50, freeze=FreezeScheme.IRBS_2))
    with pytest.raises(ConfigurationError):
        validate_spec(ModelSpec(backbone=Backbone.MOBILENETV2, freeze=FreezeScheme.RBS_1))
    with pytest.raises(ConfigurationError):
        validate_spec(ModelSpec(init=InitKind.CHECKPOINT))


@pytest.mark.parametrize("backbone,scheme", PAIRINGS)
def test_freeze_plan_partitions_parameters(desk_spec, backbone, scheme):
    spec = desk_spec(backbone, freeze=FreezeScheme(scheme))
    model = SeverityNet(spec)
    plan = freeze_plan(spec, model)
    names = [name for name, _ in model.named_parameters()]

    assert set(plan.frozen_parameter_names).isdisjoint(plan.trainable_parameter_names)
    assert sorted(plan.frozen_parameter_names + plan.trainable_parameter_names) == sorted(names)
    head = model.head_prefix
    assert any(name.startswith(head) for name in plan.trainable_parameter_names)
    assert not any(name.startswith(head) for name in plan.frozen_parameter_names)
    assert bool(plan.frozen_parameter_names) == (scheme != "none")


@pytest.mark.parametrize(
    "backbone,shallow,deep",
    [("resnet50", "RBs-1", "RBs-2"), ("resnet34", "RBs-1", "RBs-2"), ("mobilenetv2", "IRBs-2", "IRBs-3")],
)
def test_deeper_schemes_nest(desk_spec, backbone, shallow, deep):
    low = set(freeze_plan(desk_spec(backbone, freeze=FreezeScheme(shallow))).frozen_parameter_names)
    high = set(freeze_plan(desk_spec(backbone, freeze=FreezeScheme(deep))).frozen_parameter_names)
    assert low < high


@pytest.mark.parametrize("backbone,scheme", PAIRINGS)
def test_frozen_parameters_survive_sgd_steps(desk_spec, backbone, scheme):
    model = build_model(desk_spec(backbone, freeze=FreezeScheme(scheme)))
    plan = freeze_plan(model.spec, model)
    before = {name: tensor.detach().clone() for name, tensor in model.state_dict().items()}
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.SGD(trainable, lr=0.1, momentum=0.9, weight_decay=0.001)

    model.train()
    for step in range(3):
        loss = model(_batch(4)).pow(2).mean() + 1.0
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

    after = model.state_dict()
    for name in plan.frozen_parameter_names:
        assert torch.equal(before[name], after[name]), name
    for name, module in model.named_modules():
        if isinstance(module, torch.nn.BatchNorm2d) and model.is_frozen(name):
            assert not module.training
            assert torch.equal(before[f"{name}.running_mean"], after[f"{name}.running_mean"])
    head_weight = model.head_prefix + ("weight" if backbone != "mobilenetv2" else "1.weight")
    assert not torch.equal(before[head_weight], after[head_weight])


def test_bone_age_pretraining_transfers_to_both_heads(bone_age_manifest_path, desk_spec, tmp_path):
    manifest = load_manifest(bone_age_manifest_path, task="bone_age")
    seed_everything(0)
    pretrained = train(
        build_model(desk_spec("resnet34"), task="bone_age"),
        manifest,
        TrainConfig(task=TrainTask.BONE_AGE, epochs=2, batch_size=4, learning_rate=0.003),
        policy=AugmentPolicy(target_size=(64, 64)),
    ).best_checkpoint
    path = pretrained.save(tmp_path / "pretrain.pt")

    loaded = Checkpoint.load(path)
    assert list(loaded.state_dict) == list(pretrained.state_dict)
    for name, tensor in pretrained.state_dict.items():
        assert torch.equal(loaded.state_dict[name], tensor), name
    assert loaded.target_stats == pretrained.target_stats

    for head, task in (("regression", "svdh_regression"), ("classification", "svdh_classification")):
        spec = desk_spec("resnet34", head, freeze=FreezeScheme.RBS_1, init=InitKind.CHECKPOINT, checkpoint=path)
        state = build_model(spec, task=task).state_dict()
        for name, tensor in loaded.state_dict.items():
            if name.startswith("body.fc."):
                assert state[name].shape != tensor.shape or not torch.equal(state[name], tensor), name
            else:
                assert torch.equal(state[name], tensor), name
        assert state["body.fc.weight"].shape[0] == (10 if head == "classification" else 1)


def test_transfer_copies_backbone_and_reinitialises_head(desk_spec, tmp_path):
    source = Checkpoint.from_model(SeverityNet(desk_spec("resnet34")), "bone_age", epoch=3)
    path = source.save(tmp_path / "pretrain.pt")

    spec = desk_spec("resnet34", freeze=FreezeScheme.RBS_1, init=InitKind.CHECKPOINT, checkpoint=path)
    model = build_model(spec, task="svdh_regression")
    state = model.state_dict()
    for name, tensor in source.state_dict.items():
        if name.startswith("body.fc."):
            assert not torch.equal(tensor, state[name])
        else:
            assert torch.equal(tensor, state[name]), name
    assert model.spec.init is InitKind.CHECKPOINT


def test_transfer_into_classification_head(desk_spec):
    source = Checkpoint.from_model(SeverityNet(desk_spec("mobilenetv2")), "bone_age")
    model = transfer_weights(source, desk_spec("mobilenetv2", "classification"), task="svdh_classification")
    assert model.head.out_features == 10
    state = model.state_dict()
    for name, tensor in source.state_dict.items():
        if not name.startswith("body.classifier."):
            assert torch.equal(tensor, state[name])


def test_transfer_reuses_head_for_same_task(desk_spec):
    source = Checkpoint.from_model(SeverityNet(desk_spec("resnet34")), "svdh_regression")
    model = transfer_weights(source, desk_spec("resnet34"), task="svdh_regression")
    assert torch.equal(model.state_dict()["body.fc.weight"], source.state_dict["body.fc.weight"])


def test_transfer_across_backbones_fails(desk_spec):
    source = Checkpoint.from_model(SeverityNet(desk_spec("mobilenetv2")), "bone_age")
    with pytest.raises(CheckpointIncompatibleError) as excinfo:
        transfer_weights(source, desk_spec("resnet50"))
    assert excinfo.value.missing
    assert excinfo.value.unexpected


def test_checkpoint_round_trip(desk_spec, tmp_path):
    model = SeverityNet(desk_spec("resnet50", HeadKind.CLASSIFICATION.value))
    model.eval()
    checkpoint = Checkpoint.from_model(model, "svdh_classification", binning_edges=(0, 5, 10, 15, 20, 30, 45, 70, 110, 180, 280), image_size=(64, 64))
    loaded = Checkpoint.load(checkpoint.save(tmp_path / "model.pt"))

    assert loaded.spec == model.spec
    assert loaded.image_size == (64, 64)
    assert loaded.binning_edges[-1] == 280
    rebuilt = loaded.build_model()
    rebuilt.eval()
    with torch.no_grad():
        assert torch.equal(rebuilt(_batch(2)), model(_batch(2)))


def test_loading_foreign_file_fails(tmp_path):
    path = tmp_path / "other.pt"
    torch.save({"weights": torch.zeros(1)}, path)
    with pytest.raises(CheckpointIncompatibleError):
        Checkpoint.load(path)
