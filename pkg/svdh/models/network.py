"""Single-channel ResNet/MobileNetV2 backbones with regression or classification heads."""

from __future__ import annotations

from typing import List, Sequence, Tuple

import torch
from torch import nn
from torch.nn.modules.batchnorm import _BatchNorm
from torchvision.models import MobileNetV2
from torchvision.models.resnet import BasicBlock, Bottleneck, ResNet

from .spec import Backbone, ModelSpec, validate_spec

FEATURE_STRIDE = 32

RESNET_LAYOUTS = {
    Backbone.RESNET34: (BasicBlock, [3, 4, 6, 3], 64),
    Backbone.RESNET50: (Bottleneck, [3, 4, 6, 3], 64),
}
DESK_RESNET_LAYOUTS = {
    Backbone.RESNET34: (BasicBlock, [1, 1, 1, 1], 64),
    Backbone.RESNET50: (Bottleneck, [1, 1, 1, 1], 16),
}

# (expansion t, channels c, repeats n, stride s) per inverted residual stack.
MOBILENET_SETTING = [
    [1, 16, 1, 1],
    [6, 24, 2, 2],
    [6, 32, 3, 2],
    [6, 64, 4, 2],
    [6, 96, 3, 1],
    [6, 160, 3, 2],
    [6, 320, 1, 1],
]
DESK_MOBILENET_SETTING = [[t, c, 1, s] for t, c, _, s in MOBILENET_SETTING]
DESK_MOBILENET_WIDTH = 0.5


def mobilenet_setting(desk_scale: bool) -> List[List[int]]:
    return DESK_MOBILENET_SETTING if desk_scale else MOBILENET_SETTING


def mobilenet_stack_indices(desk_scale: bool) -> List[Tuple[int, ...]]:
    """``features`` indices of each inverted residual stack (index 0 is the stem)."""
    stacks = []
    start = 1
    for _, _, repeats, _ in mobilenet_setting(desk_scale):
        stacks.append(tuple(range(start, start + repeats)))
        start += repeats
    return stacks


def _single_channel_conv(conv: nn.Conv2d) -> nn.Conv2d:
    replacement = nn.Conv2d(
        1,
        conv.out_channels,
        kernel_size=conv.kernel_size,
        stride=conv.stride,
        padding=conv.padding,
        bias=conv.bias is not None,
    )
    nn.init.kaiming_normal_(replacement.weight, mode="fan_out", nonlinearity="relu")
    return replacement


def _build_resnet(spec: ModelSpec) -> ResNet:
    layouts = DESK_RESNET_LAYOUTS if spec.desk_scale else RESNET_LAYOUTS
    block, layers, width_per_group = layouts[spec.backbone]
    model = ResNet(block, layers, num_classes=spec.head_width, width_per_group=width_per_group)
    model.conv1 = _single_channel_conv(model.conv1)
    return model


def _build_mobilenet(spec: ModelSpec) -> MobileNetV2:
    model = MobileNetV2(
        num_classes=spec.head_width,
        width_mult=DESK_MOBILENET_WIDTH if spec.desk_scale else 1.0,
        inverted_residual_setting=mobilenet_setting(spec.desk_scale),
    )
    model.features[0][0] = _single_channel_conv(model.features[0][0])
    return model


class SeverityNet(nn.Module):
    """Backbone plus task head; input is a (B, 1, H, W) batch."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = validate_spec(spec)
        if spec.backbone.is_resnet:
            self.body = _build_resnet(spec)
        else:
            self.body = _build_mobilenet(spec)
        self._frozen_prefixes: Tuple[str, ...] = ()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)

    @property
    def head_prefix(self) -> str:
        return head_prefix(self.spec.backbone)

    @property
    def head(self) -> nn.Linear:
        if self.spec.backbone.is_resnet:
            return self.body.fc
        return self.body.classifier[-1]

    def feature_layer(self) -> nn.Module:
        """Last convolutional stage, whose output feeds global pooling and the head."""
        if self.spec.backbone.is_resnet:
            return self.body.layer4
        return self.body.features[-1]

    @property
    def frozen_prefixes(self) -> Tuple[str, ...]:
        return self._frozen_prefixes

    def set_frozen_prefixes(self, prefixes: Sequence[str]) -> None:
        self._frozen_prefixes = tuple(prefixes)
        self.train(self.training)

    def is_frozen(self, name: str) -> bool:
        qualified = name + "."
        return any(qualified.startswith(prefix) for prefix in self._frozen_prefixes)

    def train(self, mode: bool = True) -> "SeverityNet":
        # Frozen stages keep their normalisation running statistics fixed.
        super().train(mode)
        if mode:
            for name, module in self.named_modules():
                if isinstance(module, _BatchNorm) and self.is_frozen(name):
                    module.eval()
        return self


def head_prefix(backbone: Backbone) -> str:
    return "body.fc." if backbone.is_resnet else "body.classifier."
