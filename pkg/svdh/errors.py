"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations

from typing import Optional, Sequence


class SvdHError(Exception):
    """Base class for all errors raised by the toolkit."""


class ScoreValidationError(SvdHError, ValueError):
    """Raised when an erosion/JSN entry or score breaks the scoring rules."""


class ScoreRangeError(SvdHError, ValueError):
    """Raised when a total falls outside the 0-280 scoring range."""


class ConfigurationError(SvdHError, ValueError):
    """Raised for invalid run configuration or model specification."""


class ManifestError(SvdHError, ValueError):
    """Raised when a manifest CSV cannot be parsed or validated."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ImageValidationError(SvdHError, ValueError):
    """Raised for empty or otherwise unusable images."""


class ArgumentError(SvdHError, ValueError):
    """Raised when a numeric routine receives malformed arguments."""


class UndefinedCorrelationError(ArgumentError):
    """Raised when PCC is requested for a constant series.

    MAE and RMSE are still well defined and travel with the exception.
    """

    def __init__(self, message: str, mae: float, rmse: float):
        super().__init__(message)
        self.mae = mae
        self.rmse = rmse


class CheckpointIncompatibleError(SvdHError, ValueError):
    """Raised when checkpoint weights cannot be mapped onto a model."""

    def __init__(
        self,
        message: str,
        missing: Sequence[str] = (),
        unexpected: Sequence[str] = (),
        mismatched: Sequence[str] = (),
    ):
        self.missing = list(missing)
        self.unexpected = list(unexpected)
        self.mismatched = list(mismatched)
        details = []
        if self.missing:
            details.append(f"missing: {', '.join(self.missing)}")
        if self.unexpected:
            details.append(f"unexpected: {', '.join(self.unexpected)}")
        if self.mismatched:
            details.append(f"shape mismatch: {', '.join(self.mismatched)}")
        if details:
            message = f"{message} ({'; '.join(details)})"
        super().__init__(message)


class NonFiniteLossError(SvdHError, RuntimeError):
    """Raised when training produces a NaN or infinite loss."""

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")


class ArtifactWriteError(SvdHError, OSError):
    """Raised when an output file cannot be written."""


class OutputExistsError(SvdHError, FileExistsError):
    """Raised when an output directory is not empty and --force is absent."""
