"""Structured logging helpers shared by the natlas commands.

Every record is one JSON object. A command runs inside ``run_context`` (which
stamps ``run_id``, ``command`` and ``seed``) and its phases inside ``stage``,
so each line of a long identify or forcing run can be traced back to the
invocation and phase that produced it.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .hashing import stable_int_hash

UTC = getattr(datetime, "UTC", timezone.utc)
_LOGGER_NAME = "natlas"
_configured = False
_base_context: dict[str, Any] = {}
_context_stack: list[dict[str, Any]] = []


def configure_logging(level: int | str = logging.INFO) -> None:
    """Install the line formatter once; the ``natlas`` level follows every call."""

    global _configured
    if not _configured:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
        _configured = True
    logging.getLogger(_LOGGER_NAME).setLevel(level)


def set_global_context(**fields: Any) -> None:
    """Add persistent context fields that appear on every structured log."""

    _base_context.update({k: v for k, v in fields.items() if v is not None})


@contextmanager
def logging_context(**fields: Any) -> Iterator[None]:
    """Push a temporary logging context for the duration of the ``with`` block."""

    ctx = {k: v for k, v in fields.items() if v is not None}
    _context_stack.append(ctx)
    try:
        yield
    finally:
        _context_stack.pop()


def run_id(command: str, seed: int, out_dir: str) -> str:
    """``<command>-<seed>-<hash>``; identical invocations share an id."""
    return f"{command}-{seed}-{stable_int_hash(f'{command}:{seed}:{out_dir}'):08x}"


@contextmanager
def run_context(command: str, seed: int, out_dir: str, **fields: Any) -> Iterator[str]:
    rid = run_id(command, seed, out_dir)
    with logging_context(run_id=rid, command=command, seed=seed, **fields):
        yield rid


@contextmanager
def stage(name: str, **fields: Any) -> Iterator[None]:
    """Tag records with ``stage`` and log its start, end and duration."""

    started = time.perf_counter()
    with logging_context(stage=name):
        jlog("info", event="stage_start", **fields)
        try:
            yield
        except BaseException as exc:
            jlog("error", event="stage_failed", error_type=type(exc).__name__, elapsed_s=_elapsed(started))
            raise
        jlog("info", event="stage_done", elapsed_s=_elapsed(started))


def _elapsed(started: float) -> float:
    return round(time.perf_counter() - started, 3)


def _merged_context() -> dict[str, Any]:
    merged: dict[str, Any] = {}
    merged.update(_base_context)
    for ctx in _context_stack:
        merged.update(ctx)
    return merged


def _utcnow_iso() -> str:
    return datetime.now(UTC).isoformat()


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (Path, bytes)):
        return str(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value, key=str)
    return repr(value)


def jlog(level: str, /, **fields: Any) -> None:
    """Emit a structured JSON log payload under the ``natlas`` logger."""

    log = logging.getLogger(_LOGGER_NAME)
    record = {"ts": _utcnow_iso(), **_merged_context(), **fields}
    getattr(log, level.lower())(json.dumps(record, ensure_ascii=False, sort_keys=True, default=_jsonable))


def runlog(event: str, *, experiment: str, cell: str, **kw: Any) -> None:
    """One record per experiment cell (a forcing pair, a fallback step, an eval plan)."""

    jlog("info", event=event, experiment=experiment, cell=cell, **kw)


__all__ = ["configure_logging", "jlog", "logging_context", "run_context", "run_id", "runlog", "set_global_context", "stage"]
