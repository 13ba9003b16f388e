"""Binary container shared by checkpoints and stats files.

Layout: 8-byte magic, 8-byte little-endian header length, UTF-8 JSON header
(``meta`` plus a tensor table of name/dtype/shape/offset/nbytes), then the raw
little-endian tensor blob. Headers are serialized with sorted keys so that
equal content always produces equal bytes.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import CorruptHeaderError, TruncatedBlobError

_LEN = struct.Struct("<Q")
ALLOWED_DTYPES = ("<f4", "<f8", "<i8")


@dataclass(frozen=True, slots=True)
class TensorFile:
    magic: bytes
    meta: dict[str, Any]
    tensors: dict[str, np.ndarray]


def _canonical(arr: np.ndarray) -> np.ndarray:
    dtype = np.dtype(arr.dtype).newbyteorder("<")
    if dtype.str not in ALLOWED_DTYPES:
        raise ValueError(f"unsupported tensor dtype {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=dtype)


def encode(magic: bytes, meta: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> bytes:
    assert len(magic) == 8, "magic must be 8 bytes"
    table = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        a = _canonical(arr)
        raw = a.tobytes()
        table.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": dict(meta), "tensors": table}, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return b"".join([magic, _LEN.pack(len(header)), header, *blobs])


def decode(payload: bytes, magic: bytes) -> TensorFile:
    if len(payload) < len(magic) + _LEN.size:
        raise CorruptHeaderError(f"file too short for a header ({len(payload)} bytes)")
    if payload[: len(magic)] != magic:
        raise CorruptHeaderError(f"bad magic {payload[:len(magic)]!r}, expected {magic!r}")
    (hlen,) = _LEN.unpack_from(payload, len(magic))
    start = len(magic) + _LEN.size
    if start + hlen > len(payload):
        raise CorruptHeaderError(f"header length {hlen} exceeds file size")
    try:
        header = json.loads(payload[start : start + hlen].decode("utf-8"))
        table = header["tensors"]
        meta = header["meta"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptHeaderError(f"unreadable header: {exc}") from exc
    blob = memoryview(payload)[start + hlen :]
    tensors: dict[str, np.ndarray] = {}
    for entry in table:
        try:
            name, dtype, shape = entry["name"], np.dtype(entry["dtype"]), tuple(int(s) for s in entry["shape"])
            offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptHeaderError(f"bad tensor table entry {entry!r}") from exc
        if dtype.str not in ALLOWED_DTYPES or nbytes != dtype.itemsize * int(np.prod(shape, dtype=np.int64)):
            raise CorruptHeaderError(f"tensor {name!r}: inconsistent dtype/shape/nbytes")
        if offset < 0 or offset + nbytes > len(blob):
            raise TruncatedBlobError(f"tensor {name!r} needs bytes [{offset}, {offset + nbytes}) but blob has {len(blob)}")
        tensors[name] = np.frombuffer(blob[offset : offset + nbytes], dtype=dtype).reshape(shape).copy()
    return TensorFile(magic=magic, meta=meta, tensors=tensors)


def read(path: str | Path, magic: bytes) -> TensorFile:
    return decode(Path(path).read_bytes(), magic)


__all__ = ["TensorFile", "decode", "encode", "read"]
