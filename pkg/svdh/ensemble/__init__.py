"""Three-member linear stacking."""

from .service import (
    ClasswiseLinear,
    EnsembleSpec,
    StackedPrediction,
    StackerConfig,
    StackMode,
    check_member_backbones,
    fit_stacker,
    least_squares_stacker,
    predict_stacked,
    restandardize_members,
    stack_member_logits,
)

__all__ = [
    "ClasswiseLinear",
    "EnsembleSpec",
    "StackedPrediction",
    "StackerConfig",
    "StackMode",
    "check_member_backbones",
    "fit_stacker",
    "least_squares_stacker",
    "predict_stacked",
    "restandardize_members",
    "stack_member_logits",
]
