"""loguru sink configuration."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import List, Optional, Union

from loguru import logger

from .config import Settings

STDERR_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}"


def configure_logging(settings: Settings, log_file: Optional[Union[str, Path]] = None) -> List[int]:
    """Replace loguru's sinks with stderr (and optionally a run log file); returns sink ids."""
    logger.remove()
    sinks = [
        logger.add(
            sys.stderr,
            level=settings.log_level,
            format=STDERR_FORMAT,
            serialize=settings.log_json,
            colorize=None if not settings.log_json else False,
        )
    ]
    if log_file is not None:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        sinks.append(logger.add(log_file, level="DEBUG", serialize=settings.log_json, encoding="utf-8"))
    return sinks
