"""Lens profiles over a prompt set, averaged per language, and their report files."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from ..corpus.classify import token_membership
from ..corpus.languages import LanguageRegistry
from ..corpus.tokenizer import tokenize
from ..errors import ValidationError
from ..harness.emit import emit_csv, emit_heatmap_svg, emit_json, emit_line_plot_svg
from ..logging import jlog
from ..model.transformer import TinyDecoder
from ..workers import run_cells
from .probe import DEFAULT_TOP_N, LayerLanguageProfile, LensMode, language_profile, lens_distributions

CSV_HEADER = ("layer", "language", "target_prob", "pivot_prob", "entropy")


@dataclass(frozen=True, eq=False)
class ProfileSuite:
    pivot: str
    mode: LensMode
    profiles: dict[str, tuple[LayerLanguageProfile, ...]]  # per target language, in prompt order

    def mean_curves(self, lang: str) -> dict[str, np.ndarray]:
        ps = self.profiles[lang]
        return {
            "target_prob": np.mean([p.target_prob for p in ps], axis=0),
            "pivot_prob": np.mean([p.pivot_prob for p in ps], axis=0),
            "entropy": np.mean([p.entropy for p in ps], axis=0),
        }

    def overall_curves(self) -> dict[str, np.ndarray]:
        everything = [p for lang in sorted(self.profiles) for p in self.profiles[lang]]
        return {
            "target_prob": np.mean([p.target_prob for p in everything], axis=0),
            "pivot_prob": np.mean([p.pivot_prob for p in everything], axis=0),
            "entropy": np.mean([p.entropy for p in everything], axis=0),
        }

    def csv_rows(self) -> list[list[Any]]:
        rows: list[list[Any]] = []
        for lang in sorted(self.profiles):
            curves = self.mean_curves(lang)
            for layer in range(len(curves["target_prob"])):
                rows.append([layer, lang, curves["target_prob"][layer], curves["pivot_prob"][layer], curves["entropy"][layer]])
        return rows

    def to_json(self) -> dict[str, Any]:
        return {
            "pivot": self.pivot,
            "mode": self.mode.value,
            "mean": {k: v.tolist() for k, v in self.overall_curves().items()},
            "languages": {
                lang: {
                    "mean": {k: v.tolist() for k, v in self.mean_curves(lang).items()},
                    "prompts": [p.to_json() for p in self.profiles[lang]],
                }
                for lang in sorted(self.profiles)
            },
        }


def profile_suite(
    model: TinyDecoder,
    prompts: Mapping[str, Sequence[str]],
    registry: LanguageRegistry,
    *,
    pivot: str | None = None,
    mode: LensMode = LensMode.MASS,
    top_n: int = DEFAULT_TOP_N,
    concurrency: int = 1,
) -> ProfileSuite:
    """Profile every prompt with its own language as the target; prompts run in parallel."""

    pivot = registry[pivot or registry.pivot()].id
    membership = token_membership(registry)

    def cell(lang: str, text: str) -> LayerLanguageProfile:
        dists = lens_distributions(model, tokenize(text))
        return language_profile(dists, lang, pivot, registry, mode=mode, top_n=top_n, membership=membership)

    cells = [((lang, i), partial(cell, lang, text)) for lang in sorted(prompts) for i, text in enumerate(prompts[lang])]
    if not cells:
        raise ValidationError("lens suite needs at least one prompt")
    jlog("info", event="lens_suite_start", prompts=len(cells), pivot=pivot, mode=mode.value)
    results = run_cells(cells, concurrency)
    profiles = {lang: tuple(results[(lang, i)] for i in range(len(prompts[lang]))) for lang in sorted(prompts) if prompts[lang]}
    jlog("info", event="lens_suite_done", languages=sorted(profiles))
    return ProfileSuite(pivot=pivot, mode=mode, profiles=profiles)


def write_suite(suite: ProfileSuite, out_dir: str | Path, metadata: Mapping[str, Any]) -> list[Path]:
    """CSV, JSON and the target / pivot / evolution / heatmap figures."""

    root = Path(out_dir)
    langs = sorted(suite.profiles)
    curves = {lang: suite.mean_curves(lang) for lang in langs}
    overall = suite.overall_curves()
    n_layers = len(overall["target_prob"])
    written = [
        emit_csv(CSV_HEADER, suite.csv_rows(), root / "lens_profile.csv"),
        emit_json({**metadata, **suite.to_json()}, root / "lens_profile.json"),
        emit_line_plot_svg(
            {lang: curves[lang]["target_prob"] for lang in langs},
            root / "lens_target_prob.svg",
            title="target-language probability",
            ylabel="probability",
            ylim=(0.0, 1.0),
        ),
        emit_line_plot_svg(
            {lang: curves[lang]["pivot_prob"] for lang in langs},
            root / "lens_pivot_prob.svg",
            title=f"pivot ({suite.pivot}) probability",
            ylabel="probability",
            ylim=(0.0, 1.0),
        ),
        emit_line_plot_svg(
            {"target": overall["target_prob"], "pivot": overall["pivot_prob"], "entropy": overall["entropy"]},
            root / "lens_evolution.svg",
            title="mean over all prompts",
        ),
        emit_heatmap_svg(
            np.stack([curves[lang]["target_prob"] for lang in langs]) if langs else np.zeros((0, n_layers)),
            langs,
            [str(i) for i in range(n_layers)],
            root / "lens_heatmap.svg",
            title="target-language probability by layer",
            xlabel="layer",
            vmin=0.0,
            vmax=1.0,
        ),
    ]
    return written


__all__ = ["CSV_HEADER", "ProfileSuite", "profile_suite", "write_suite"]
