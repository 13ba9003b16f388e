"""Activation probabilities, LAPE entropy and the two percentile gates."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

import numpy as np

from ..errors import StatsError, ValidationError
from .percentile import check_percentile, percentile
from .stats import ActivationStats


class FilterPopulation(str, Enum):
    PROB = "prob"
    VALUE = "value"


@dataclass(frozen=True, slots=True)
class FilterConfig:
    filter_percentile: float = 95.0
    threshold_percentile: float = 95.0
    population: FilterPopulation = FilterPopulation.PROB

    def validate(self) -> None:
        check_percentile(self.filter_percentile, "filter_percentile")
        check_percentile(self.threshold_percentile, "threshold_percentile")

    def to_json(self) -> dict[str, Any]:
        return {
            "filter_percentile": self.filter_percentile,
            "threshold_percentile": self.threshold_percentile,
            "filter_population": self.population.value,
        }


def lape_entropy(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Entropy of ``p`` normalized over its last axis, with 0 ln 0 = 0.

    Returns (entropy, active). Rows whose probabilities are all zero are
    inactive and get the maximum entropy ln(n).
    """

    p = np.asarray(p, dtype=np.float64)
    n = p.shape[-1]
    total = p.sum(axis=-1, keepdims=True)
    active = total[..., 0] > 0
    norm = np.divide(p, total, out=np.zeros_like(p), where=total > 0)
    logs = np.log(norm, out=np.zeros_like(norm), where=norm > 0)
    entropy = -(norm * logs).sum(axis=-1)
    entropy = np.where(active, np.clip(entropy, 0.0, math.log(n)), math.log(n))
    return entropy, active


@dataclass(frozen=True, eq=False)
class LapeTable:
    languages: tuple[str, ...]
    probs: np.ndarray  # (n_layers, d_ff, n_langs)
    normalized: np.ndarray  # same; rows sum to 1 where active
    entropy: np.ndarray  # (n_layers, d_ff)
    active: np.ndarray  # (n_layers, d_ff) bool
    means: np.ndarray  # (n_layers, d_ff, n_langs) mean tap over all tokens
    filters: FilterConfig
    passed_filter: np.ndarray  # (n_layers, d_ff) bool
    passed_threshold: np.ndarray  # (n_layers, d_ff, n_langs) bool
    filter_cut: float
    thresholds: tuple[float, ...]
    stats_digest: str

    @property
    def n_layers(self) -> int:
        return int(self.probs.shape[0])

    @property
    def d_ff(self) -> int:
        return int(self.probs.shape[1])

    @property
    def d_total(self) -> int:
        return self.n_layers * self.d_ff

    def refiltered(self, filters: FilterConfig) -> "LapeTable":
        if filters == self.filters:
            return self
        return replace(self, filters=filters, **_gates(self.probs, self.means, filters))

    def to_json(self) -> dict[str, Any]:
        neurons = []
        for layer in range(self.n_layers):
            for idx in range(self.d_ff):
                neurons.append(
                    {
                        "layer": layer,
                        "neuron": idx,
                        "p": [float(v) for v in self.probs[layer, idx]],
                        "entropy": float(self.entropy[layer, idx]),
                        "active": bool(self.active[layer, idx]),
                        "passed_filter": bool(self.passed_filter[layer, idx]),
                        "passed_threshold": [lang for li, lang in enumerate(self.languages) if self.passed_threshold[layer, idx, li]],
                    }
                )
        return {
            "languages": list(self.languages),
            "stats_digest": self.stats_digest,
            "filters": self.filters.to_json(),
            "filter_cut": self.filter_cut,
            "thresholds": dict(zip(self.languages, self.thresholds)),
            "neurons": neurons,
        }


def _gates(probs: np.ndarray, means: np.ndarray, filters: FilterConfig) -> dict[str, Any]:
    filters.validate()
    # the population switch moves the survivor cut only; thresholds always read probabilities
    population = probs if filters.population is FilterPopulation.PROB else means
    cut = percentile(population, filters.filter_percentile)
    thresholds = tuple(percentile(probs[:, :, li], filters.threshold_percentile) for li in range(probs.shape[2]))
    return {
        "passed_filter": population.max(axis=2) >= cut,
        "passed_threshold": probs >= np.asarray(thresholds)[None, None, :],
        "filter_cut": cut,
        "thresholds": thresholds,
    }


def compute_lape(stats: ActivationStats, filters: FilterConfig = FilterConfig()) -> LapeTable:
    """p_l = active_l / tokens_l per neuron, normalized over languages, scored by entropy."""

    stats.check_consistent()
    empty = [lang for lang, n in zip(stats.languages, stats.token_counts) if n == 0]
    if empty:
        raise StatsError(f"language {empty[0]!r} has no observed tokens")
    if len(stats.languages) < 2:
        raise ValidationError("LAPE needs at least two languages")
    probs = stats.active_counts.astype(np.float64) / stats.token_counts.astype(np.float64)[None, None, :]
    entropy, active = lape_entropy(probs)
    total = probs.sum(axis=2, keepdims=True)
    normalized = np.divide(probs, total, out=np.zeros_like(probs), where=total > 0)
    means = stats.mean_activations()
    return LapeTable(
        languages=stats.languages,
        probs=probs,
        normalized=normalized,
        entropy=entropy,
        active=active,
        means=means,
        filters=filters,
        stats_digest=stats.digest(),
        **_gates(probs, means, filters),
    )


__all__ = ["FilterConfig", "FilterPopulation", "LapeTable", "compute_lape", "lape_entropy"]
