"""Mergeable per-column quantile sketch.

A deterministic compactor hierarchy (Munro-Paterson style) shared by many
columns that always receive the same number of rows: every token contributes
one value to each of the d_ff columns, so one set of level sizes serves all
columns and compaction is a single vectorized sort.

Level ``h`` holds items of weight ``2**h``. A level reaching ``capacity`` rows
is sorted per column and every other row (alternating offset per level) is
promoted; an odd leftover row stays behind. Each compaction at level ``h``
moves any rank by at most ``2**h``, so ``rank_error_bound`` is exact
bookkeeping, not an estimate.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import StatsError

DEFAULT_CAPACITY = 512


@dataclass(slots=True)
class ColumnSketch:
    n_columns: int
    capacity: int = DEFAULT_CAPACITY
    count: int = 0
    levels: list[np.ndarray] = field(default_factory=list)
    compactions: list[int] = field(default_factory=list)
    offsets: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 2 or self.capacity % 2:
            raise StatsError(f"sketch capacity must be an even number >= 2, got {self.capacity}")
        if self.n_columns < 1:
            raise StatsError(f"sketch needs at least one column, got {self.n_columns}")

    def _level(self, h: int) -> None:
        while len(self.levels) <= h:
            self.levels.append(np.empty((0, self.n_columns), dtype=np.float32))
            self.compactions.append(0)
            self.offsets.append(0)

    def update(self, rows: np.ndarray) -> None:
        """Add ``rows`` of shape (n, n_columns)."""
        rows = np.asarray(rows, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[1] != self.n_columns:
            raise StatsError(f"expected rows of shape (n, {self.n_columns}), got {rows.shape}")
        if rows.shape[0] == 0:
            return
        self._level(0)
        self.levels[0] = np.concatenate([self.levels[0], rows])
        self.count += rows.shape[0]
        self._compress()

    def _compress(self) -> None:
        h = 0
        while h < len(self.levels):
            level = self.levels[h]
            if level.shape[0] >= self.capacity:
                ordered = np.sort(level, axis=0)
                even = ordered.shape[0] - ordered.shape[0] % 2
                promoted = ordered[self.offsets[h] : even : 2]
                self.offsets[h] ^= 1
                self.compactions[h] += 1
                self.levels[h] = ordered[even:]
                self._level(h + 1)
                self.levels[h + 1] = np.concatenate([self.levels[h + 1], promoted])
            h += 1

    def merge(self, other: "ColumnSketch") -> "ColumnSketch":
        if other.n_columns != self.n_columns or other.capacity != self.capacity:
            raise StatsError("cannot merge sketches with different columns or capacity")
        out = ColumnSketch(self.n_columns, self.capacity)
        depth = max(len(self.levels), len(other.levels))
        if depth:
            out._level(depth - 1)
        for h in range(depth):
            parts = [s.levels[h] for s in (self, other) if h < len(s.levels)]
            out.levels[h] = np.concatenate(parts)
            out.compactions[h] = sum(s.compactions[h] for s in (self, other) if h < len(s.compactions))
            out.offsets[h] = sum(s.offsets[h] for s in (self, other) if h < len(s.offsets)) % 2
        out.count = self.count + other.count
        out._compress()
        return out

    def _weighted(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.levels:
            return np.empty((0, self.n_columns), dtype=np.float32), np.empty(0, dtype=np.int64)
        values = np.concatenate(self.levels)
        weights = np.concatenate([np.full(level.shape[0], 2**h, dtype=np.int64) for h, level in enumerate(self.levels)])
        return values, weights

    def quantile(self, q: float) -> np.ndarray:
        """Nearest-rank ``q``-quantile per column; NaN when the sketch is empty."""
        if not 0.0 <= q <= 1.0:
            raise StatsError(f"quantile must be in [0, 1], got {q}")
        if self.count == 0:
            return np.full(self.n_columns, np.nan)
        values, weights = self._weighted()
        order = np.argsort(values, axis=0, kind="stable")
        cum = np.cumsum(weights[order], axis=0)
        target = max(1, math.ceil(q * self.count))
        pick = np.argmax(cum >= target, axis=0)
        cols = np.arange(self.n_columns)
        return values[order[pick, cols], cols].astype(np.float64)

    def rank_error_bound(self) -> float:
        """Worst-case absolute rank error as a fraction of ``count``."""
        if self.count == 0:
            return 0.0
        return sum(c * 2**h for h, c in enumerate(self.compactions)) / self.count

    # --- serialization ----------------------------------------------------

    def state(self) -> dict[str, Any]:
        return {
            "n_columns": self.n_columns,
            "capacity": self.capacity,
            "count": self.count,
            "compactions": list(self.compactions),
            "offsets": list(self.offsets),
        }

    def arrays(self) -> list[np.ndarray]:
        return list(self.levels)

    @classmethod
    def restore(cls, state: Mapping[str, Any], levels: list[np.ndarray]) -> "ColumnSketch":
        try:
            sk = cls(int(state["n_columns"]), int(state["capacity"]))
            sk.count = int(state["count"])
            sk.compactions = [int(c) for c in state["compactions"]]
            sk.offsets = [int(o) for o in state["offsets"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise StatsError(f"malformed sketch state: {exc}") from exc
        if len(levels) != len(sk.compactions) or any(lv.ndim != 2 or lv.shape[1] != sk.n_columns for lv in levels):
            raise StatsError("sketch levels do not match their state")
        if sum(lv.shape[0] * 2**h for h, lv in enumerate(levels)) != sk.count:
            raise StatsError("sketch level weights do not add up to its count")
        sk.levels = [np.asarray(lv, dtype=np.float32) for lv in levels]
        return sk


__all__ = ["ColumnSketch", "DEFAULT_CAPACITY"]
