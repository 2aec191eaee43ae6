from __future__ import annotations

import json

import numpy as np
import pytest
import torch

from svdh.errors import ArgumentError
from svdh.explain import blend_overlay, explain_cases, grad_cam, grad_cam_batch, render_overlay
from svdh.models import Checkpoint, SeverityNet
from svdh.preprocess import PixelStats


def _images(n: int = 1, side: int = 64) -> torch.Tensor:
    return torch.randn(n, 1, side, side, generator=torch.Generator().manual_seed(11))


def _model(spec) -> SeverityNet:
    torch.manual_seed(0)
    model = SeverityNet(spec)
    model.eval()
    return model


@pytest.mark.parametrize("backbone", ["resnet34", "mobilenetv2"])
def test_heatmap_shapes_and_range(desk_spec, backbone):
    heatmap = grad_cam(_model(desk_spec(backbone)), _images()[0])
    assert heatmap.source_resolution == (2, 2)
    assert heatmap.resolution == (64, 64)
    assert heatmap.values.min() >= 0.0
    assert heatmap.values.max() <= 1.0
    assert heatmap.target == 0


def test_zero_head_gives_zero_heatmap(desk_spec):
    model = _model(desk_spec("resnet34"))
    with torch.no_grad():
        model.head.weight.zero_()
    heatmap = grad_cam(model, _images()[0])
    assert not heatmap.values.any()


def test_duplicate_images_get_identical_heatmaps(desk_spec):
    image = _images()
    first, second = grad_cam_batch(_model(desk_spec("resnet34")), torch.cat([image, image]))
    assert np.array_equal(first.values, second.values)


def test_head_bias_shift_leaves_heatmap_unchanged(desk_spec):
    model = _model(desk_spec("resnet34"))
    image = _images()[0]
    before = grad_cam(model, image).values
    with torch.no_grad():
        model.head.bias.add_(5.0)
    assert np.allclose(grad_cam(model, image).values, before)


@pytest.mark.parametrize("factor", [0.25, 3.5])
def test_positive_head_scaling_leaves_heatmap_unchanged(desk_spec, factor):
    model = _model(desk_spec("resnet34"))
    image = _images()[0]
    before = grad_cam(model, image).values
    with torch.no_grad():
        model.head.weight.mul_(factor)
    assert np.allclose(grad_cam(model, image).values, before, atol=1e-6)


def test_classification_target_defaults_to_predicted_class(desk_spec):
    model = _model(desk_spec("resnet34", "classification"))
    image = _images()[0]
    with torch.no_grad():
        predicted = int(model(image.unsqueeze(0)).argmax(dim=1))
    assert grad_cam(model, image).target == predicted
    assert grad_cam(model, image, target=9).target == 9
    with pytest.raises(ArgumentError):
        grad_cam(model, image, target=10)


def test_model_mode_and_gradients_restored(desk_spec):
    model = _model(desk_spec("resnet34"))
    model.train()
    grad_cam(model, _images()[0])
    assert model.training
    assert all(p.grad is None for p in model.parameters())


def test_overlay_blending():
    rng = np.random.default_rng(0)
    image = rng.random((32, 32))
    heat = rng.random((32, 32))

    blank = blend_overlay(image, np.zeros_like(image))
    assert np.allclose(blank, np.repeat(image[..., None], 3, axis=2))
    assert np.array_equal(blend_overlay(image, heat), blend_overlay(image, heat))
    with pytest.raises(ArgumentError):
        blend_overlay(image, heat[:16])


def test_overlay_png_is_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    image = rng.random((32, 32))
    heat = rng.random((32, 32))
    first = render_overlay(image, heat, tmp_path / "a.png")
    second = render_overlay(image, heat, tmp_path / "b.png")
    assert first.read_bytes() == second.read_bytes()


def test_explain_cases_writes_report(desk_spec, synthetic_manifest, tmp_path):
    model = _model(desk_spec("resnet34"))
    checkpoint = Checkpoint.from_model(
        model,
        "svdh_regression",
        target_stats=synthetic_manifest.target_stats,
        pixel_stats=PixelStats(mean=0.3, sd=0.2),
        image_size=(64, 64),
    )
    records = synthetic_manifest.split("test") + synthetic_manifest.split("validation")
    result = explain_cases(checkpoint, records, tmp_path / "explain", max_per_kind=2)

    report = json.loads(result.report_path.read_text(encoding="utf-8"))
    kinds = {case["kind"] for case in report["cases"]} | set(report["empty_kinds"])
    assert kinds == {"TP", "TN", "FP", "FN"}
    assert report["heuristic"] is False
    for case in report["cases"]:
        assert (tmp_path / "explain" / case["overlay_path"]).is_file()
    assert sum(1 for case in report["cases"] if case["kind"] == "FN") <= 2
