"""Fallback cascades: deactivate language sets one after another and watch the output language move."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from ..corpus.classify import UNKNOWN, classify
from ..corpus.languages import LanguageRegistry
from ..corpus.tokenizer import detokenize, tokenize
from ..errors import ValidationError
from ..lape.select import NeuronSet
from ..logging import jlog, runlog
from ..model.directives import DirectiveMode
from ..model.generate import GenerationSettings, generate
from ..model.transformer import TinyDecoder
from ..steer.plans import InterventionPlan, compose, plan_deactivate
from ..workers import run_cells
from .emit import emit_csv, emit_heatmap_svg, emit_json

DEFAULT_FALLBACK_VALUE = -1.0


@dataclass(frozen=True, eq=False)
class FallbackReport:
    order: tuple[str, ...]
    languages: tuple[str, ...]
    deact_value: float
    deact_mode: DirectiveMode
    decisions: tuple[tuple[str, ...], ...]  # per step, top-1 decision per prompt
    recipes: tuple[str, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return (*self.languages, UNKNOWN)

    @property
    def steps(self) -> int:
        return len(self.decisions)

    def distribution(self, step: int) -> dict[str, float]:
        decided = self.decisions[step]
        n = len(decided)
        return {lab: sum(1 for d in decided if d == lab) / n for lab in self.labels}

    def matrix(self) -> np.ndarray:
        """Row per step, column per language plus unknown; rows sum to 1."""
        return np.array([[self.distribution(s)[lab] for lab in self.labels] for s in range(self.steps)])

    def top_language(self, step: int) -> str:
        dist = self.distribution(step)
        return max(self.labels, key=lambda lab: (dist[lab], lab != UNKNOWN, -self.labels.index(lab)))

    def step_label(self, step: int) -> str:
        return "baseline" if step == 0 else "-" + ",".join(self.order[:step])

    def to_json(self) -> dict[str, Any]:
        return {
            "order": list(self.order),
            "deact_value": self.deact_value,
            "deact_mode": self.deact_mode.value,
            "prompts": len(self.decisions[0]) if self.decisions else 0,
            "steps": [
                {
                    "step": s,
                    "deactivated": list(self.order[:s]),
                    "recipe": self.recipes[s],
                    "top": self.top_language(s),
                    "distribution": self.distribution(s),
                    "decisions": list(self.decisions[s]),
                }
                for s in range(self.steps)
            ],
        }


def cascade_plans(
    sets: Mapping[str, NeuronSet],
    order: Sequence[str],
    value: float,
    mode: DirectiveMode,
    d_ff: int,
) -> list[InterventionPlan]:
    """Plan for every step: step ``s`` deactivates ``order[:s]``."""
    plans = [InterventionPlan.empty()]
    for s in range(1, len(order) + 1):
        plans.append(compose(*(plan_deactivate(sets[lang], value, mode) for lang in order[:s]), d_ff=d_ff))
    return plans


def _fallback_cell(
    model: TinyDecoder,
    registry: LanguageRegistry,
    plan: InterventionPlan,
    settings: GenerationSettings,
    step: int,
    index: int,
    text: str,
) -> str:
    ids = generate(model, tokenize(text), plan.directives, settings)
    top = classify(detokenize(ids), registry).top1()
    runlog("fallback_cell_done", experiment="fallback", cell=f"{step}#{index}", top1=top, tokens=len(ids))
    return top


def run_fallback(
    model: TinyDecoder,
    registry: LanguageRegistry,
    sets: Mapping[str, NeuronSet],
    order: Sequence[str],
    prompts: Sequence[str],
    *,
    deact_value: float = DEFAULT_FALLBACK_VALUE,
    deact_mode: DirectiveMode = DirectiveMode.SET,
    settings: GenerationSettings = GenerationSettings(),
    concurrency: int = 1,
) -> FallbackReport:
    order = tuple(order)
    if len(set(order)) != len(order):
        raise ValidationError(f"fallback order repeats a language: {list(order)}")
    for lang in order:
        if lang not in registry:
            raise ValidationError(f"fallback order names unregistered language {lang!r}")
        if lang not in sets:
            raise ValidationError(f"no neuron set for language {lang!r}")
        sets[lang].validate(model.config.n_layers, model.config.d_ff)
    if not prompts:
        raise ValidationError("fallback needs at least one prompt")
    if not order:
        jlog("warning", event="fallback_empty_order")

    plans = cascade_plans(sets, order, deact_value, deact_mode, model.config.d_ff)
    cells = [
        ((s, i), partial(_fallback_cell, model, registry, plan, settings, s, i, text))
        for s, plan in enumerate(plans)
        for i, text in enumerate(prompts)
    ]
    jlog("info", event="fallback_start", order=list(order), prompts=len(prompts), deact_value=deact_value)
    results = run_cells(cells, concurrency)
    decisions = tuple(tuple(results[(s, i)] for i in range(len(prompts))) for s in range(len(plans)))
    report = FallbackReport(order, registry.ids, float(deact_value), deact_mode, decisions, tuple(p.recipe for p in plans))
    jlog("info", event="fallback_done", tops=[report.top_language(s) for s in range(report.steps)])
    return report


def write_fallback_report(report: FallbackReport, out_dir: str | Path, metadata: Mapping[str, Any]) -> list[Path]:
    root = Path(out_dir)
    labels = list(report.labels)
    matrix = report.matrix()
    steps = [report.step_label(s) for s in range(report.steps)]
    return [
        emit_json({**metadata, **report.to_json()}, root / "fallback.json"),
        emit_csv(("step", "deactivated", *labels), [[s, steps[s], *matrix[s]] for s in range(report.steps)], root / "fallback.csv"),
        emit_heatmap_svg(
            matrix,
            steps,
            labels,
            root / "fallback.svg",
            title=f"output language by deactivation step (value {report.deact_value:g})",
            xlabel="output language",
            ylabel="deactivated",
            vmin=0.0,
            vmax=1.0,
        ),
    ]


__all__ = ["DEFAULT_FALLBACK_VALUE", "FallbackReport", "cascade_plans", "run_fallback", "write_fallback_report"]
