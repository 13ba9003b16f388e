"""Language forcing: answer a source-language question in a target language.

Every ordered (source, target) pair, diagonal included, is generated for every
question; the overall rate averages the off-diagonal cells only. A cell
succeeds when the classifier's top-1 language is the target; an unknown
decision is a failure.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from ..corpus.classify import UNKNOWN, classify
from ..corpus.languages import LanguageRegistry
from ..corpus.tokenizer import detokenize, tokenize
from ..errors import ValidationError
from ..lape.select import NeuronSet
from ..lape.stats import ActivationStats
from ..logging import jlog, runlog
from ..model.directives import DirectiveMode
from ..model.generate import GenerationSettings, generate
from ..model.transformer import TinyDecoder
from ..steer.plans import (
    BoostDenominator,
    DiffMeanLayers,
    InterventionPlan,
    ReplaceStatistic,
    compose,
    compute_boosts,
    plan_activate,
    plan_deactivate,
    plan_diffmean,
    plan_replace,
)
from ..workers import run_cells
from .emit import emit_csv, emit_heatmap_svg, emit_json


class Strategy(str, Enum):
    ACTIVATE = "activate"
    DEACT_ACT = "deact+act"


class Family(str, Enum):
    ADDITIVE = "additive"
    REPLACEMENT = "replacement"
    DIFFMEAN = "diffmean"


@dataclass(frozen=True, slots=True)
class ForcingConfig:
    k_percent: float
    strategy: Strategy = Strategy.DEACT_ACT
    family: Family = Family.ADDITIVE
    deact_value: float = 0.0
    deact_mode: DirectiveMode = DirectiveMode.MULTIPLY
    boost_denominator: BoostDenominator = BoostDenominator.ALL
    replace_statistic: ReplaceStatistic = ReplaceStatistic.MEAN
    diffmean_scale: float = 1.0
    diffmean_layers: DiffMeanLayers = DiffMeanLayers.ALL
    settings: GenerationSettings = field(default_factory=GenerationSettings)
    concurrency: int = 1

    @property
    def label(self) -> str:
        return f"{self.family.value}_{self.strategy.value.replace('+', '-')}_k{self.k_percent:g}_v{self.deact_value:g}"

    def params(self) -> dict[str, Any]:
        return {
            "k_percent": self.k_percent,
            "strategy": self.strategy.value,
            "family": self.family.value,
            "deact_value": self.deact_value,
            "deact_mode": self.deact_mode.value,
            "boost_denominator": self.boost_denominator.value,
            "replace_statistic": self.replace_statistic.value,
            "diffmean_scale": self.diffmean_scale,
            "diffmean_layers": self.diffmean_layers.value,
            "max_tokens": self.settings.max_tokens,
            "repetition_penalty": self.settings.repetition_penalty,
            "temperature": self.settings.temperature,
        }


@dataclass(frozen=True, slots=True)
class ForcingOutcome:
    source: str
    target: str
    question: int
    output: str
    top1: str
    unknown_mass: float
    success: bool

    @property
    def unknown(self) -> bool:
        return self.top1 == UNKNOWN


@dataclass(frozen=True, eq=False)
class ForcingReport:
    config: ForcingConfig
    languages: tuple[str, ...]
    outcomes: tuple[ForcingOutcome, ...]
    recipes: dict[tuple[str, str], str]

    def matrix(self) -> np.ndarray:
        """Success rate per (source row, target column)."""
        n = len(self.languages)
        hits, totals = np.zeros((n, n)), np.zeros((n, n))
        pos = {lang: i for i, lang in enumerate(self.languages)}
        for o in self.outcomes:
            totals[pos[o.source], pos[o.target]] += 1
            hits[pos[o.source], pos[o.target]] += o.success
        return np.divide(hits, totals, out=np.zeros((n, n)), where=totals > 0)

    def overall(self) -> float:
        off = [o.success for o in self.outcomes if o.source != o.target]
        return float(np.mean(off)) if off else 0.0

    def unknown_rate(self) -> float:
        off = [o.unknown for o in self.outcomes if o.source != o.target]
        return float(np.mean(off)) if off else 0.0

    def to_json(self) -> dict[str, Any]:
        return {
            "params": self.config.params(),
            "languages": list(self.languages),
            "overall": self.overall(),
            "unknown_rate": self.unknown_rate(),
            "matrix": self.matrix().tolist(),
            "recipes": {f"{s}->{t}": r for (s, t), r in sorted(self.recipes.items())},
            "outcomes": [
                {
                    "source": o.source,
                    "target": o.target,
                    "question": o.question,
                    "top1": o.top1,
                    "unknown": o.unknown,
                    "unknown_mass": o.unknown_mass,
                    "success": o.success,
                    "output": o.output,
                }
                for o in self.outcomes
            ],
        }


def build_plan(
    config: ForcingConfig,
    source: str,
    target: str,
    sets: Mapping[str, NeuronSet],
    stats: ActivationStats,
    d_ff: int,
) -> InterventionPlan:
    if config.family is Family.ADDITIVE:
        act = plan_activate(sets[target], compute_boosts(stats, sets[target], config.boost_denominator))
    elif config.family is Family.REPLACEMENT:
        act = plan_replace(sets[target], stats, config.replace_statistic)
    else:
        act = plan_diffmean(stats, target, config.diffmean_scale, layers=config.diffmean_layers, neuron_set=sets[target])
    if config.strategy is Strategy.ACTIVATE:
        return act
    return compose(plan_deactivate(sets[source], config.deact_value, config.deact_mode), act, d_ff=d_ff)


def _forcing_cell(
    model: TinyDecoder,
    registry: LanguageRegistry,
    plan: InterventionPlan,
    settings: GenerationSettings,
    source: str,
    target: str,
    index: int,
    text: str,
    experiment: str,
) -> ForcingOutcome:
    ids = generate(model, tokenize(text), plan.directives, settings)
    output = detokenize(ids)
    dist = classify(output, registry)
    top = dist.top1()
    runlog("forcing_cell_done", experiment=experiment, cell=f"{source}->{target}#{index}", top1=top, tokens=len(ids))
    return ForcingOutcome(source, target, index, output, top, dist.unknown, top == target)


def run_forcing(
    model: TinyDecoder,
    registry: LanguageRegistry,
    sets: Mapping[str, NeuronSet],
    stats: ActivationStats,
    questions: Mapping[str, Sequence[str]],
    config: ForcingConfig,
) -> ForcingReport:
    languages = registry.ids
    missing = [lang for lang in languages if not questions.get(lang)]
    if missing:
        raise ValidationError(f"no forcing questions for language {missing[0]!r}")
    missing = [lang for lang in languages if lang not in sets]
    if missing:
        raise ValidationError(f"no neuron set for language {missing[0]!r}")
    for s in sets.values():
        s.validate(model.config.n_layers, model.config.d_ff)

    plans = {(s, t): build_plan(config, s, t, sets, stats, model.config.d_ff) for s in languages for t in languages}
    cells = [
        ((s, t, i), partial(_forcing_cell, model, registry, plans[(s, t)], config.settings, s, t, i, text, config.label))
        for s in languages
        for t in languages
        for i, text in enumerate(questions[s])
    ]
    jlog("info", event="forcing_start", cells=len(cells), **config.params())
    results = run_cells(cells, config.concurrency)
    report = ForcingReport(config, languages, tuple(results.values()), {k: p.recipe for k, p in plans.items()})
    jlog("info", event="forcing_done", label=config.label, overall=report.overall(), unknown_rate=report.unknown_rate())
    return report


def write_forcing_report(report: ForcingReport, out_dir: str | Path, metadata: Mapping[str, Any]) -> list[Path]:
    root = Path(out_dir)
    name = report.config.label
    langs = list(report.languages)
    matrix = report.matrix()
    return [
        emit_json({**metadata, **report.to_json()}, root / f"{name}.json"),
        emit_csv(
            ("source", "target", "question", "top1", "unknown", "success"),
            [[o.source, o.target, o.question, o.top1, int(o.unknown), int(o.success)] for o in report.outcomes],
            root / f"{name}_cells.csv",
        ),
        emit_csv(("source", *langs), [[s, *matrix[i]] for i, s in enumerate(langs)], root / f"{name}_matrix.csv"),
        emit_heatmap_svg(
            matrix,
            langs,
            langs,
            root / f"{name}_matrix.svg",
            title=f"forcing success ({report.config.family.value}, {report.config.strategy.value}, top {report.config.k_percent:g}%)",
            xlabel="target",
            ylabel="source",
            vmin=0.0,
            vmax=1.0,
        ),
    ]


# ============================
# Sweeps
# ============================


def run_forcing_sweep(
    model: TinyDecoder,
    registry: LanguageRegistry,
    sets_by_k: Mapping[float, Mapping[str, NeuronSet]],
    stats: ActivationStats,
    questions: Mapping[str, Sequence[str]],
    base: ForcingConfig,
    *,
    families: Sequence[Family],
    strategies: Sequence[Strategy],
    deact_values: Sequence[float],
) -> list[ForcingReport]:
    """One report per (k, family, strategy, deactivation value) in that nesting order.

    Activate-only runs ignore the deactivation value and are generated once.
    """

    reports = []
    for k in sorted(sets_by_k):
        for family in families:
            for strategy in strategies:
                values = deact_values if strategy is Strategy.DEACT_ACT else deact_values[:1]
                for value in values:
                    config = replace(base, k_percent=k, family=family, strategy=strategy, deact_value=value)
                    reports.append(run_forcing(model, registry, sets_by_k[k], stats, questions, config))
    return reports


def sweep_table(reports: Sequence[ForcingReport]) -> tuple[list[str], list[list[Any]]]:
    """Overall success (%) with rows intervention x strategy x value and one column per top-k%."""

    ks = sorted({r.config.k_percent for r in reports})
    rows_by_key: dict[tuple[str, str, str], dict[float, float]] = {}
    for r in reports:
        value = f"{r.config.deact_value:g}" if r.config.strategy is Strategy.DEACT_ACT else ""
        key = (r.config.family.value, r.config.strategy.value, value)
        rows_by_key.setdefault(key, {})[r.config.k_percent] = 100.0 * r.overall()
    header = ["intervention", "strategy", "deact_value", *(f"top-{k:g}%" for k in ks)]
    rows = [[*key, *(cols.get(k, float("nan")) for k in ks)] for key, cols in sorted(rows_by_key.items())]
    return header, rows


__all__ = [
    "Family",
    "ForcingConfig",
    "ForcingOutcome",
    "ForcingReport",
    "Strategy",
    "build_plan",
    "run_forcing",
    "run_forcing_sweep",
    "sweep_table",
    "write_forcing_report",
]
