"""Checkpoint value type and the ``NATLAS01`` file format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensorfile
from ..errors import ConfigError, CorruptHeaderError, ShapeMismatchError
from ..hashing import sha256_bytes
from ..logging import jlog
from ..storage import write_artifact
from .config import ModelConfig, expected_shapes

MAGIC = b"NATLAS01"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Checkpoint:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def validate(self) -> None:
        try:
            self.config.validate()
        except ConfigError as exc:
            raise ShapeMismatchError(f"config cannot describe a valid tensor layout: {exc}") from exc
        shapes = expected_shapes(self.config)
        missing = [n for n in shapes if n not in self.tensors]
        if missing:
            raise ShapeMismatchError(f"missing tensor {missing[0]!r}")
        extra = sorted(set(self.tensors) - set(shapes))
        if extra:
            raise ShapeMismatchError(f"unexpected tensor {extra[0]!r}")
        for name, shape in shapes.items():
            arr = self.tensors[name]
            if tuple(arr.shape) != shape:
                raise ShapeMismatchError(f"tensor {name!r} has shape {tuple(arr.shape)}, expected {shape}")
            if arr.dtype != np.float32:
                raise ShapeMismatchError(f"tensor {name!r} has dtype {arr.dtype}, expected float32")

    def to_bytes(self) -> bytes:
        self.validate()
        ordered = {name: self.tensors[name] for name in expected_shapes(self.config)}
        meta = {"format_version": FORMAT_VERSION, "config": self.config.to_dict()}
        return tensorfile.encode(MAGIC, meta, ordered)

    def digest(self) -> str:
        return sha256_bytes(self.to_bytes())


def checkpoint_from_bytes(payload: bytes) -> Checkpoint:
    tf = tensorfile.decode(payload, MAGIC)
    if tf.meta.get("format_version") != FORMAT_VERSION:
        raise CorruptHeaderError(f"unsupported checkpoint format_version {tf.meta.get('format_version')!r}")
    try:
        config = ModelConfig.from_dict(tf.meta["config"])
    except (KeyError, ConfigError) as exc:
        raise CorruptHeaderError(f"bad config in header: {exc}") from exc
    ckpt = Checkpoint(config=config, tensors={k: v.astype(np.float32, copy=False) for k, v in tf.tensors.items()})
    ckpt.validate()
    return ckpt


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = Path(path).read_bytes()
    ckpt = checkpoint_from_bytes(payload)
    jlog("info", event="checkpoint_loaded", path=str(path), bytes=len(payload), n_layers=ckpt.config.n_layers)
    return ckpt


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    return write_artifact(path, ckpt.to_bytes())


__all__ = ["Checkpoint", "MAGIC", "checkpoint_from_bytes", "load_checkpoint", "save_checkpoint"]
