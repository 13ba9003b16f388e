"""Toolkit version resolution helpers."""

from __future__ import annotations

import os

TOOLKIT_NAME = "natlas"
TOOLKIT_VERSION = "0.1.0"


def get_toolkit_version(command: str | None = None) -> str:
    """Return a human-readable version string with an env override."""

    default = f"{TOOLKIT_NAME}:{TOOLKIT_VERSION}" if command is None else f"{TOOLKIT_NAME}-{command}:{TOOLKIT_VERSION}"
    return os.getenv("NATLAS_VERSION", default)


__all__ = ["TOOLKIT_VERSION", "get_toolkit_version"]
