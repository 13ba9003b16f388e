"""Deterministic hashing used for seeds and provenance."""

from __future__ import annotations

import hashlib


def stable_int_hash(s: str) -> int:
    """Return a small deterministic hash, used to derive per-item seeds."""

    return int(hashlib.sha1(s.encode("utf-8")).hexdigest()[:8], 16)


def derive_seed(seed: int, *parts: object) -> int:
    """Fold a base seed and labels into a new 32-bit seed."""

    return stable_int_hash(":".join([str(seed), *(str(p) for p in parts)]))


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


__all__ = ["derive_seed", "sha256_bytes", "stable_int_hash"]
