"""Content hashing for run provenance."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Dict, Iterable

CHUNK_SIZE = 1 << 20


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_artifacts(root: Path, paths: Iterable[Path]) -> Dict[str, str]:
    """Map each artifact path (relative to ``root`` when possible) to its SHA-256."""
    root = Path(root).resolve()
    hashes: Dict[str, str] = {}
    for path in sorted({Path(p).resolve() for p in paths}):
        if not path.is_file():
            continue
        try:
            key = path.relative_to(root).as_posix()
        except ValueError:
            key = path.as_posix()
        hashes[key] = sha256_file(path)
    return hashes
