"""Prompted evaluation over JSON-lines task files, and the cross-language transfer matrix."""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from ..corpus.tokenizer import detokenize, tokenize
from ..errors import ValidationError
from ..lape.select import NeuronSet
from ..lape.stats import ActivationStats
from ..logging import jlog, runlog
from ..model.generate import GenerationSettings, generate
from ..model.transformer import TinyDecoder
from ..steer.plans import InterventionPlan, compute_boosts, plan_activate
from ..workers import run_cells
from .emit import emit_csv, emit_heatmap_svg, emit_json

DEFAULT_TASK_TOKENS = 32


class Metric(str, Enum):
    EXACT_MATCH = "exact_match"
    CHAR_F1 = "char_f1"


@dataclass(frozen=True, slots=True)
class EvalTask:
    prompt: str
    reference: str
    max_tokens: int = DEFAULT_TASK_TOKENS


def load_tasks(path: str | Path) -> list[EvalTask]:
    """One ``{"prompt", "reference", "max_tokens"}`` object per line; blank lines are skipped."""

    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read task file {path}: {exc}") from exc
    tasks = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            task = EvalTask(str(data["prompt"]), str(data["reference"]), int(data.get("max_tokens", DEFAULT_TASK_TOKENS)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: malformed task: {exc}") from exc
        if task.max_tokens < 1:
            raise ValidationError(f"{path}:{lineno}: max_tokens must be >= 1")
        tasks.append(task)
    if not tasks:
        raise ValidationError(f"task file {path} has no tasks")
    return tasks


def normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


def exact_match(prediction: str, reference: str) -> float:
    return 1.0 if normalize(prediction) == normalize(reference) else 0.0


def char_f1(prediction: str, reference: str) -> float:
    """Harmonic mean of character precision and recall over multisets, whitespace removed."""

    pred = Counter("".join(normalize(prediction).split()))
    ref = Counter("".join(normalize(reference).split()))
    if not pred and not ref:
        return 1.0
    common = sum((pred & ref).values())
    if common == 0:
        return 0.0
    precision = common / sum(pred.values())
    recall = common / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


SCORERS = {Metric.EXACT_MATCH: exact_match, Metric.CHAR_F1: char_f1}


@dataclass(frozen=True, slots=True)
class EvalItem:
    prompt: str
    reference: str
    prediction: str
    score: float


@dataclass(frozen=True, slots=True)
class EvalResult:
    task_id: str
    metric: Metric
    recipe: str
    items: tuple[EvalItem, ...]

    @property
    def aggregate(self) -> float:
        return float(np.mean([i.score for i in self.items])) if self.items else 0.0

    def to_json(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "metric": self.metric.value,
            "recipe": self.recipe,
            "aggregate": self.aggregate,
            "items": [{"prompt": i.prompt, "reference": i.reference, "prediction": i.prediction, "score": i.score} for i in self.items],
        }


def _eval_cell(model: TinyDecoder, plan: InterventionPlan, settings: GenerationSettings, task: EvalTask, metric: Metric) -> EvalItem:
    ids = generate(model, tokenize(task.prompt), plan.directives, replace(settings, max_tokens=task.max_tokens))
    prediction = detokenize(ids)
    return EvalItem(task.prompt, task.reference, prediction, SCORERS[metric](prediction, task.reference))


def run_eval(
    model: TinyDecoder,
    tasks: Sequence[EvalTask],
    *,
    task_id: str,
    plan: InterventionPlan | None = None,
    metric: Metric = Metric.EXACT_MATCH,
    settings: GenerationSettings = GenerationSettings(),
    concurrency: int = 1,
) -> EvalResult:
    """Greedy generation per item with the item's own token budget."""

    if not tasks:
        raise ValidationError("eval needs at least one task")
    plan = plan or InterventionPlan.empty()
    cells = [(i, partial(_eval_cell, model, plan, settings, task, metric)) for i, task in enumerate(tasks)]
    results = run_cells(cells, concurrency)
    result = EvalResult(task_id, metric, plan.recipe, tuple(results[i] for i in range(len(tasks))))
    runlog("eval_done", experiment=task_id, cell=plan.recipe, metric=metric.value, aggregate=result.aggregate, items=len(tasks))
    return result


def write_eval_result(result: EvalResult, out_dir: str | Path, metadata: Mapping[str, Any]) -> list[Path]:
    root = Path(out_dir)
    return [
        emit_json({**metadata, **result.to_json()}, root / f"eval_{result.task_id}.json"),
        emit_csv(
            ("item", "score", "prediction", "reference"),
            [[i, item.score, item.prediction, item.reference] for i, item in enumerate(result.items)],
            root / f"eval_{result.task_id}.csv",
        ),
    ]


# ============================
# Transfer
# ============================


@dataclass(frozen=True, eq=False)
class TransferReport:
    metric: Metric
    task_languages: tuple[str, ...]
    activated: tuple[str, ...]
    baseline: dict[str, float]
    scores: np.ndarray  # (task languages, activated languages)

    def deltas(self) -> np.ndarray:
        return self.scores - np.array([[self.baseline[t]] for t in self.task_languages])

    def to_json(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "task_languages": list(self.task_languages),
            "activated": list(self.activated),
            "baseline": {t: self.baseline[t] for t in self.task_languages},
            "scores": self.scores.tolist(),
            "deltas": self.deltas().tolist(),
        }


def run_transfer(
    model: TinyDecoder,
    tasks: Mapping[str, Sequence[EvalTask]],
    sets: Mapping[str, NeuronSet],
    stats: ActivationStats,
    *,
    metric: Metric = Metric.CHAR_F1,
    settings: GenerationSettings = GenerationSettings(),
    concurrency: int = 1,
) -> TransferReport:
    """Score every task language under each language's activation plan, against the unsteered baseline."""

    task_langs = tuple(sorted(tasks))
    activated = tuple(sorted(sets))
    if not task_langs or not activated:
        raise ValidationError("transfer needs task languages and neuron sets")
    plans = {lang: plan_activate(sets[lang], compute_boosts(stats, sets[lang])) for lang in activated}
    jlog("info", event="transfer_start", task_languages=list(task_langs), activated=list(activated), metric=metric.value)
    score = partial(run_eval, model, metric=metric, settings=settings, concurrency=concurrency)
    baseline = {t: score(tasks[t], task_id=t).aggregate for t in task_langs}
    scores = np.array([[score(tasks[t], task_id=t, plan=plans[a]).aggregate for a in activated] for t in task_langs])
    report = TransferReport(metric, task_langs, activated, baseline, scores)
    jlog("info", event="transfer_done", mean_delta=float(report.deltas().mean()))
    return report


def write_transfer_report(report: TransferReport, out_dir: str | Path, metadata: Mapping[str, Any]) -> list[Path]:
    root = Path(out_dir)
    deltas = report.deltas()
    acts = list(report.activated)
    spread = float(np.abs(deltas).max()) if deltas.size else 0.0
    return [
        emit_json({**metadata, **report.to_json()}, root / "transfer.json"),
        emit_csv(
            ("task_language", "baseline", *acts),
            [[t, report.baseline[t], *deltas[i]] for i, t in enumerate(report.task_languages)],
            root / "transfer.csv",
        ),
        emit_heatmap_svg(
            deltas,
            list(report.task_languages),
            acts,
            root / "transfer.svg",
            title=f"{report.metric.value} change when activating a language",
            xlabel="activated",
            ylabel="task language",
            vmin=-spread,
            vmax=spread,
            fmt="{:+.2f}",
        ),
    ]


__all__ = [
    "EvalItem",
    "EvalResult",
    "EvalTask",
    "Metric",
    "TransferReport",
    "char_f1",
    "exact_match",
    "load_tasks",
    "normalize",
    "run_eval",
    "run_transfer",
    "write_eval_result",
    "write_transfer_report",
]
