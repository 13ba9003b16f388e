"""Logit lens: per-layer next-token distributions and their language mass."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import torch

from ..corpus.classify import UNKNOWN, token_membership
from ..corpus.languages import LanguageRegistry
from ..corpus.tokenizer import token_repr
from ..model.directives import TapDirective, compile_directives
from ..model.transformer import TinyDecoder

DEFAULT_TOP_N = 5


class LensMode(str, Enum):
    MASS = "mass"
    TOP1 = "top1"


def lens_distributions(model: TinyDecoder, prompt: Sequence[int], directives: Sequence[TapDirective] = ()) -> np.ndarray:
    """Next-token probabilities at the final position read from every layer, (n_layers, vocab).

    Each residual state after a block goes through ``model.project``, the same
    final-norm and unembedding call that produces the model's own logits, so
    the last row is exactly the model's output distribution.
    """

    model.check_tokens(prompt)
    edits = compile_directives(directives, model.config) if directives else None
    with torch.inference_mode():
        ids = torch.tensor([list(prompt)], dtype=torch.long)
        _, _, hiddens = model.run(ids, edits)
        logits = torch.stack([model.project(h)[0, -1] for h in hiddens])
    return output_distribution(logits)


def output_distribution(logits: torch.Tensor) -> np.ndarray:
    """Softmax over the last axis in float64."""
    return torch.softmax(logits.to(torch.float64), dim=-1).numpy()


@dataclass(frozen=True, eq=False)
class LayerLanguageProfile:
    languages: tuple[str, ...]
    target: str
    pivot: str
    mode: LensMode
    language_mass: np.ndarray  # (n_layers, n_langs + 1); last column is unknown
    target_prob: np.ndarray
    pivot_prob: np.ndarray
    entropy: np.ndarray
    top_tokens: tuple[tuple[tuple[str, float], ...], ...]

    @property
    def n_layers(self) -> int:
        return int(self.language_mass.shape[0])

    def to_json(self) -> dict[str, Any]:
        labels = [*self.languages, UNKNOWN]
        return {
            "target": self.target,
            "pivot": self.pivot,
            "mode": self.mode.value,
            "layers": [
                {
                    "layer": layer,
                    "target_prob": float(self.target_prob[layer]),
                    "pivot_prob": float(self.pivot_prob[layer]),
                    "entropy": float(self.entropy[layer]),
                    "language_mass": {lab: float(v) for lab, v in zip(labels, self.language_mass[layer])},
                    "top_tokens": [[tok, p] for tok, p in self.top_tokens[layer]],
                }
                for layer in range(self.n_layers)
            ],
        }


def _entropy(q: np.ndarray) -> np.ndarray:
    logs = np.log(q, out=np.zeros_like(q), where=q > 0)
    return np.maximum(-(q * logs).sum(axis=-1), 0.0)


def _top_tokens(dist: np.ndarray, n: int) -> tuple[tuple[str, float], ...]:
    order = np.lexsort((np.arange(dist.size), -dist))[:n]
    return tuple((token_repr(int(t)), float(dist[t])) for t in order)


def language_profile(
    distributions: np.ndarray,
    target: str,
    pivot: str,
    registry: LanguageRegistry,
    *,
    mode: LensMode = LensMode.MASS,
    top_n: int = DEFAULT_TOP_N,
    membership: np.ndarray | None = None,
) -> LayerLanguageProfile:
    """Language mass per layer from token membership, plus target/pivot mass and entropy.

    ``mass`` aggregates every token's probability over its languages;
    ``top1`` uses only the membership of each layer's most likely token.
    Entropy covers the languages and the unknown outcome.
    """

    ids = registry.ids
    t, p = ids.index(registry[target].id), ids.index(registry[pivot].id)
    member = membership if membership is not None else token_membership(registry)
    dist = np.asarray(distributions, dtype=np.float64)
    if mode is LensMode.MASS:
        mass = dist @ member
    else:
        top = np.array([int(np.lexsort((np.arange(row.size), -row))[0]) for row in dist])
        mass = member[top]
    return LayerLanguageProfile(
        languages=ids,
        target=target,
        pivot=pivot,
        mode=mode,
        language_mass=mass,
        target_prob=mass[:, t],
        pivot_prob=mass[:, p],
        entropy=_entropy(mass),
        top_tokens=tuple(_top_tokens(row, top_n) for row in dist),
    )


__all__ = ["DEFAULT_TOP_N", "LayerLanguageProfile", "LensMode", "language_profile", "lens_distributions", "output_distribution"]
