"""Atomic local artifact writers."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .logging import jlog


def write_artifact(path: str | Path, payload: bytes) -> Path:
    """Atomically write ``payload`` to ``path`` (temp file in the same directory, then rename)."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    jlog("info", event="artifact_written", path=str(target), bytes=len(payload))
    return target


def write_text_artifact(path: str | Path, text: str) -> Path:
    return write_artifact(path, text.encode("utf-8"))


__all__ = ["write_artifact", "write_text_artifact"]
