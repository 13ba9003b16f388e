"""Layer histograms, neuron-count tables and overlap matrices over neuron sets."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .select import NeuronSet


def layer_histogram(neuron_set: NeuronSet, n_layers: int) -> list[int]:
    counts = [0] * n_layers
    for layer, _ in neuron_set.neurons:
        if not 0 <= layer < n_layers:
            raise ValidationError(f"layer {layer} out of range for {n_layers} layers")
        counts[layer] += 1
    return counts


def layer_distribution(sets: Mapping[str, NeuronSet], n_layers: int) -> dict[str, list[int]]:
    return {lang: layer_histogram(sets[lang], n_layers) for lang in sorted(sets)}


def neuron_count_table(selections: Mapping[float, Mapping[str, NeuronSet]]) -> tuple[list[str], list[list[object]]]:
    """Rows per language, one column per k (ascending): ``language, top-1%, top-2%, ...``."""

    ks = sorted(selections)
    languages = sorted({lang for sets in selections.values() for lang in sets})
    header = ["language", *(f"top-{k:g}%" for k in ks)]
    rows: list[list[object]] = []
    for lang in languages:
        rows.append([lang, *(len(selections[k][lang]) if lang in selections[k] else 0 for k in ks)])
    return header, rows


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    languages: tuple[str, ...]
    counts: np.ndarray  # (n, n) int64

    def percentages(self) -> np.ndarray:
        """Overlap as a share of the row language's set size (0 for empty rows)."""
        diag = np.diag(self.counts).astype(np.float64)[:, None]
        return np.divide(self.counts * 100.0, diag, out=np.zeros(self.counts.shape), where=diag > 0)

    def rows(self) -> list[list[object]]:
        return [[lang, *(int(v) for v in self.counts[i])] for i, lang in enumerate(self.languages)]


def overlap(sets: Mapping[str, NeuronSet] | Sequence[NeuronSet]) -> OverlapMatrix:
    items = sorted(sets.values() if isinstance(sets, Mapping) else sets, key=lambda s: s.language)
    members = [set(s.neurons) for s in items]
    n = len(items)
    counts = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            counts[i, j] = counts[j, i] = len(members[i] & members[j])
    return OverlapMatrix(languages=tuple(s.language for s in items), counts=counts)


def family_overlap(matrix: OverlapMatrix, families: Mapping[str, str]) -> tuple[float, float]:
    """Mean off-diagonal overlap within families and across families."""

    within: list[int] = []
    across: list[int] = []
    for i, a in enumerate(matrix.languages):
        for j, b in enumerate(matrix.languages):
            if i < j:
                (within if families[a] == families[b] else across).append(int(matrix.counts[i, j]))
    return (float(np.mean(within)) if within else 0.0, float(np.mean(across)) if across else 0.0)


__all__ = ["OverlapMatrix", "family_overlap", "layer_distribution", "layer_histogram", "neuron_count_table", "overlap"]
