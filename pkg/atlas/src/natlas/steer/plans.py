"""Intervention plans over language neuron sets.

A plan is an ordered list of tap directives, each tagged with the kind of
step that produced it (deactivate, activate, replace, diffmean), plus a
recipe string naming those steps.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import PlanConflictError, StatsError, ValidationError
from ..lape.select import NeuronSet
from ..lape.stats import ActivationStats
from ..model.directives import DirectiveMode, TapDirective, add, multiply, set_to
from ..storage import write_text_artifact

PLAN_SCHEMA_VERSION = 1


class StepKind(str, Enum):
    DEACTIVATE = "deactivate"
    ACTIVATE = "activate"
    REPLACE = "replace"
    DIFFMEAN = "diffmean"


class BoostDenominator(str, Enum):
    ALL = "all"
    ACTIVE = "active"


class ReplaceStatistic(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"


class DiffMeanLayers(str, Enum):
    SELECTED = "selected"
    ALL = "all"


# ============================
# Value types
# ============================


@dataclass(frozen=True, slots=True)
class BoostVector:
    language: str
    neurons: tuple[tuple[int, int], ...]
    values: tuple[float, ...]
    denominator: BoostDenominator = BoostDenominator.ALL

    def as_dict(self) -> dict[tuple[int, int], float]:
        return dict(zip(self.neurons, self.values))


@dataclass(frozen=True, eq=False)
class DiffMeanVector:
    target: str
    vectors: np.ndarray  # (n_layers, d_ff)
    scale: float = 1.0

    def scaled(self) -> np.ndarray:
        return self.scale * self.vectors


@dataclass(frozen=True, slots=True)
class InterventionPlan:
    directives: tuple[TapDirective, ...]
    kinds: tuple[StepKind, ...]
    recipe: str

    def __post_init__(self) -> None:
        if len(self.directives) != len(self.kinds):
            raise ValidationError("every directive needs a step kind")

    @classmethod
    def empty(cls) -> "InterventionPlan":
        return cls((), (), "baseline")

    def __len__(self) -> int:
        return len(self.directives)

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "recipe": self.recipe,
            "directives": [{**d.to_json(), "kind": k.value} for d, k in zip(self.directives, self.kinds)],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "InterventionPlan":
        if data.get("schema_version") != PLAN_SCHEMA_VERSION:
            raise ValidationError(f"unsupported plan schema_version {data.get('schema_version')!r}")
        try:
            entries = list(data["directives"])
            kinds = tuple(StepKind(e["kind"]) for e in entries)
            return cls(tuple(TapDirective.from_json(e) for e in entries), kinds, str(data["recipe"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed plan: {exc}") from exc


def save_plan(plan: InterventionPlan, path: str | Path) -> Path:
    return write_text_artifact(path, json.dumps(plan.to_json(), indent=2) + "\n")


def load_plan(path: str | Path) -> InterventionPlan:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read plan {path}: {exc}") from exc
    return InterventionPlan.from_json(data)


def _fmt(value: float) -> str:
    return f"{value:g}"


# ============================
# Builders
# ============================


def compute_boosts(stats: ActivationStats, neuron_set: NeuronSet, denominator: BoostDenominator = BoostDenominator.ALL) -> BoostVector:
    """Mean tap value of each neuron in the set over the language's tokens.

    ``all`` divides the value sum by every token of the language; ``active``
    divides the positive sum by the tokens on which the neuron fired.
    """

    li = stats.lang_index(neuron_set.language)
    if stats.token_counts[li] == 0:
        raise StatsError(f"no tokens observed for {neuron_set.language!r}")
    table = stats.mean_activations() if denominator is BoostDenominator.ALL else stats.active_means()
    values = tuple(float(table[layer, idx, li]) for layer, idx in neuron_set.neurons)
    return BoostVector(neuron_set.language, neuron_set.neurons, values, denominator)


def plan_activate(neuron_set: NeuronSet, boosts: BoostVector) -> InterventionPlan:
    """One add per layer carrying b_i for each of the set's neurons in that layer."""

    if boosts.language != neuron_set.language or set(boosts.neurons) != set(neuron_set.neurons):
        raise ValidationError(f"boosts for {boosts.language!r} do not cover the neuron set of {neuron_set.language!r}")
    table = boosts.as_dict()
    directives = tuple(add(layer, [table[(layer, i)] for i in idx], idx) for layer, idx in neuron_set.by_layer().items())
    return InterventionPlan(directives, (StepKind.ACTIVATE,) * len(directives), f"activate:{neuron_set.language}(add b)")


def plan_deactivate(neuron_set: NeuronSet, value: float = 0.0, mode: DirectiveMode = DirectiveMode.MULTIPLY) -> InterventionPlan:
    """Value 0 with mode multiply compiles to multiply(0); anything else to set(value)."""

    if mode is DirectiveMode.ADD:
        raise ValidationError("deactivation mode must be multiply or set")
    by_layer = neuron_set.by_layer().items()
    if value == 0.0 and mode is DirectiveMode.MULTIPLY:
        directives = tuple(multiply(layer, 0.0, idx) for layer, idx in by_layer)
        label = "multiply 0"
    else:
        directives = tuple(set_to(layer, float(value), idx) for layer, idx in by_layer)
        label = f"set {_fmt(value)}"
    return InterventionPlan(directives, (StepKind.DEACTIVATE,) * len(directives), f"deactivate:{neuron_set.language}({label})")


def plan_replace(neuron_set: NeuronSet, stats: ActivationStats, statistic: ReplaceStatistic = ReplaceStatistic.MEAN) -> InterventionPlan:
    """Overwrite each neuron with its language-conditional mean or sketch median."""

    li = stats.lang_index(neuron_set.language)
    if statistic is ReplaceStatistic.MEAN:
        table = stats.mean_activations()[:, :, li]
    else:
        table = stats.medians(neuron_set.language)
    directives = tuple(set_to(layer, [float(table[layer, i]) for i in idx], idx) for layer, idx in neuron_set.by_layer().items())
    return InterventionPlan(directives, (StepKind.REPLACE,) * len(directives), f"replace:{neuron_set.language}(set {statistic.value})")


def diffmean_vector(target_mean: np.ndarray, other_mean: np.ndarray, scale: float = 1.0, *, target: str = "") -> DiffMeanVector:
    vec = np.asarray(target_mean, dtype=np.float64) - np.asarray(other_mean, dtype=np.float64)
    if not np.isfinite(vec).all():
        raise StatsError("difference of means is not finite")
    return DiffMeanVector(target=target, vectors=vec, scale=float(scale))


def compute_diffmean(stats: ActivationStats, target: str, scale: float = 1.0) -> DiffMeanVector:
    """Mean tap on the target's tokens minus the mean tap on all other languages' tokens pooled."""

    li = stats.lang_index(target)
    if stats.token_counts[li] == 0:
        raise StatsError(f"no tokens observed for {target!r}")
    return diffmean_vector(stats.mean_activations()[:, :, li], stats.pooled_mean_excluding(target), scale, target=target)


def plan_diffmean(
    stats: ActivationStats,
    target: str,
    scale: float = 1.0,
    *,
    layers: DiffMeanLayers = DiffMeanLayers.ALL,
    neuron_set: NeuronSet | None = None,
) -> InterventionPlan:
    """Dense add of scale * (mean_target - mean_others) on every layer, or only on layers holding the target's neurons."""

    vector = compute_diffmean(stats, target, scale)
    if layers is DiffMeanLayers.SELECTED:
        if neuron_set is None or neuron_set.language != target:
            raise ValidationError(f"layer restriction needs the neuron set of {target!r}")
        chosen = sorted(neuron_set.by_layer())
    else:
        chosen = list(range(stats.n_layers))
    dense = vector.scaled()
    directives = tuple(add(layer, [float(v) for v in dense[layer]]) for layer in chosen)
    recipe = f"diffmean:{target}(scale {_fmt(scale)}, layers {layers.value})"
    return InterventionPlan(directives, (StepKind.DIFFMEAN,) * len(directives), recipe)


# ============================
# Composition
# ============================


def _set_values(directive: TapDirective, d_ff: int) -> dict[int, float]:
    targets = directive.indices if directive.indices is not None else range(d_ff)
    return {idx: directive.value_at(pos) for pos, idx in enumerate(targets)}


def compose(*plans: InterventionPlan, d_ff: int | None = None) -> InterventionPlan:
    """Concatenate plans, deactivation steps first, each plan keeping its internal order.

    The forward applies sets after adds, so a deactivating set followed by an
    add on the same neuron is folded into one set of their sum: deactivate
    (set v) then activate (add b) leaves v + b. Two sets disagreeing on one
    neuron raise ``PlanConflictError``.
    """

    steps = [(d, k) for plan in plans for d, k in zip(plan.directives, plan.kinds)]
    steps.sort(key=lambda step: 0 if step[1] is StepKind.DEACTIVATE else 1)
    if d_ff is None:
        d_ff = max((max(d.indices) + 1 for d, _ in steps if d.indices is not None), default=0)
        if any(d.indices is None and d.mode is DirectiveMode.SET for d, _ in steps):
            raise ValidationError("composing a dense set needs d_ff")

    claimed: dict[tuple[int, int], float] = {}
    for d, _ in steps:
        if d.mode is not DirectiveMode.SET:
            continue
        for idx, value in _set_values(d, d_ff).items():
            prev = claimed.setdefault((d.layer, idx), value)
            if prev != value:
                raise PlanConflictError(d.layer, idx, (prev, value))

    folded: list[TapDirective] = []
    for d, kind in steps:
        if kind is StepKind.DEACTIVATE and d.mode is DirectiveMode.SET:
            values = _set_values(d, d_ff)
            for other, other_kind in steps:
                if other.mode is DirectiveMode.ADD and other_kind is not StepKind.DEACTIVATE and other.layer == d.layer:
                    hits = _set_values(other, d_ff)
                    for idx in values:
                        if idx in hits:
                            values[idx] += hits[idx]
            d = set_to(d.layer, [values[i] for i in sorted(values)], sorted(values))
        folded.append(d)

    ordered = sorted(plans, key=lambda p: 0 if p.kinds and p.kinds[0] is StepKind.DEACTIVATE else 1)
    recipe = " + ".join(p.recipe for p in ordered if p.directives)
    return InterventionPlan(tuple(folded), tuple(k for _, k in steps), recipe or "baseline")


__all__ = [
    "BoostDenominator",
    "BoostVector",
    "DiffMeanLayers",
    "DiffMeanVector",
    "InterventionPlan",
    "ReplaceStatistic",
    "StepKind",
    "compose",
    "compute_boosts",
    "compute_diffmean",
    "diffmean_vector",
    "load_plan",
    "plan_activate",
    "plan_deactivate",
    "plan_diffmean",
    "plan_replace",
    "save_plan",
]
