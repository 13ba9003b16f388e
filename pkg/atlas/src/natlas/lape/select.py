"""Bottom-k% neuron selection and per-language assignment."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ValidationError
from ..logging import jlog
from ..storage import write_text_artifact
from .table import FilterConfig, FilterPopulation, LapeTable

Neuron = tuple[int, int]


@dataclass(frozen=True, slots=True)
class NeuronSet:
    language: str
    neurons: tuple[Neuron, ...]
    k_percent: float
    filters: FilterConfig = field(default_factory=FilterConfig)
    stats_digest: str = ""

    def __post_init__(self) -> None:
        if len(set(self.neurons)) != len(self.neurons):
            raise ValidationError(f"neuron set for {self.language!r} has duplicate entries")

    def __len__(self) -> int:
        return len(self.neurons)

    def by_layer(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for layer, idx in self.neurons:
            out.setdefault(layer, []).append(idx)
        return {layer: sorted(idx) for layer, idx in sorted(out.items())}

    def validate(self, n_layers: int, d_ff: int) -> None:
        for layer, idx in self.neurons:
            if not 0 <= layer < n_layers or not 0 <= idx < d_ff:
                raise ValidationError(f"neuron ({layer}, {idx}) of {self.language!r} out of range for {n_layers}x{d_ff}")

    def to_json(self) -> dict[str, Any]:
        return {
            "language": self.language,
            "neurons": [[layer, idx] for layer, idx in self.neurons],
            "k_percent": self.k_percent,
            **self.filters.to_json(),
            "stats_digest": self.stats_digest,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "NeuronSet":
        try:
            return cls(
                language=str(data["language"]),
                neurons=tuple((int(a), int(b)) for a, b in data["neurons"]),
                k_percent=float(data["k_percent"]),
                filters=FilterConfig(
                    filter_percentile=float(data.get("filter_percentile", 95.0)),
                    threshold_percentile=float(data.get("threshold_percentile", 95.0)),
                    population=FilterPopulation(data.get("filter_population", "prob")),
                ),
                stats_digest=str(data.get("stats_digest", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed neuron set: {exc}") from exc


@dataclass(frozen=True, slots=True)
class Selection:
    k_percent: float
    ranked: tuple[Neuron, ...]
    sets: dict[str, NeuronSet]
    multiplicity: dict[int, int]
    survivors: int

    def union(self) -> set[Neuron]:
        return {n for s in self.sets.values() for n in s.neurons}


def k_budget(k_percent: float, d_total: int) -> int:
    frac = Fraction(str(k_percent))
    if not 0 < frac <= 100:
        raise ValidationError(f"k_percent must be in (0, 100], got {k_percent}")
    return math.floor(frac * d_total / 100)


def select(table: LapeTable, k_percent: float, filters: FilterConfig | None = None) -> Selection:
    """Filter, rank by entropy, keep the bottom k% of all neurons and assign languages.

    Ranking is ascending (entropy, layer, index), so selections for growing k
    are nested. A kept neuron joins every language whose probability reaches
    that language's threshold percentile; it may join none.
    """

    if filters is not None:
        table = table.refiltered(filters)
    budget = k_budget(k_percent, table.d_total)
    candidates = table.passed_filter & table.active
    layers, idx = np.nonzero(candidates)
    order = np.lexsort((idx, layers, table.entropy[layers, idx]))
    kept = [(int(layers[i]), int(idx[i])) for i in order[:budget]]

    members: dict[str, list[Neuron]] = {lang: [] for lang in table.languages}
    multiplicity = {m: 0 for m in range(len(table.languages) + 1)}
    for layer, j in kept:
        owners = np.nonzero(table.passed_threshold[layer, j])[0]
        multiplicity[len(owners)] += 1
        for li in owners:
            members[table.languages[li]].append((layer, j))

    if not len(layers):
        jlog("warning", event="empty_survivor_set", k_percent=k_percent, filter_cut=table.filter_cut)
    sets = {
        lang: NeuronSet(lang, tuple(sorted(ns)), float(k_percent), table.filters, table.stats_digest) for lang, ns in members.items()
    }
    jlog(
        "info",
        event="selection_done",
        k_percent=k_percent,
        survivors=int(len(layers)),
        kept=len(kept),
        sizes={lang: len(s) for lang, s in sets.items()},
    )
    return Selection(k_percent=float(k_percent), ranked=tuple(kept), sets=sets, multiplicity=multiplicity, survivors=int(len(layers)))


def save_neuron_sets(sets: Iterable[NeuronSet], path: str | Path) -> Path:
    payload = {"sets": [s.to_json() for s in sorted(sets, key=lambda s: s.language)]}
    return write_text_artifact(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_neuron_sets(path: str | Path) -> dict[str, NeuronSet]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = data["sets"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"cannot read neuron sets {path}: {exc}") from exc
    sets = [NeuronSet.from_json(e) for e in entries]
    return {s.language: s for s in sets}


__all__ = ["NeuronSet", "Selection", "k_budget", "load_neuron_sets", "save_neuron_sets", "select"]
