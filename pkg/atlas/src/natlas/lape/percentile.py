"""Nearest-rank percentiles, exact for small populations and sketched above ``EXACT_LIMIT``."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..errors import ValidationError
from .sketch import ColumnSketch

EXACT_LIMIT = 1_000_000
SKETCH_CAPACITY = 4096
_SKETCH_CHUNK = 65_536


def check_percentile(p: float, name: str = "percentile") -> Fraction:
    frac = Fraction(str(p))
    if not 0 < frac <= 100:
        raise ValidationError(f"{name} must be in (0, 100], got {p}")
    return frac


def nearest_rank(n: int, p: float) -> int:
    """1-based rank ceil(p/100 * n), at least 1."""
    return max(1, math.ceil(check_percentile(p) * n / 100))


def percentile(values: np.ndarray, p: float) -> float:
    """The ``p``-th nearest-rank percentile: the 95th of 1..100 is 95."""

    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValidationError("percentile of an empty population")
    rank = nearest_rank(flat.size, p)
    if flat.size <= EXACT_LIMIT:
        return float(np.partition(flat, rank - 1)[rank - 1])
    sketch = ColumnSketch(1, SKETCH_CAPACITY)
    for start in range(0, flat.size, _SKETCH_CHUNK):
        sketch.update(flat[start : start + _SKETCH_CHUNK, None])
    return float(sketch.quantile(rank / flat.size)[0])


__all__ = ["EXACT_LIMIT", "check_percentile", "nearest_rank", "percentile"]
