"""Analytically planted checkpoints with known language neurons.

Residual coordinates: 0 is a constant 1, ``1 + l`` is language l's indicator
(``INDICATOR`` on tokens of l's alphabet), ``1 + n + l`` collects the output
vote of l's planted neurons; the remaining coordinates are never written.

Layer 0 has one uniform-attention head that adds ``CONTEXT_GAIN * INDICATOR``
times the fraction of l-tokens in the prefix to indicator l, so a language
stays visible at positions of shared punctuation. Every other attention
weight is zero.

A planted neuron of language l computes, after the pre-FFN norm with rms r,
``gate = G * (h_l - theta) / r`` and ``up = U / r``. G and U are solved so
that a token of l in an l-only context gives ``ON_MARGIN * g_hi`` and any
token in an l-free context gives ``silu(-OFF_LOGIT) * up`` (about -4e-6).
Its down-projection feeds the vote coordinate of l, and the unembedding turns
votes into logits ``w_l * (PRIOR_BIAS + mean planted tap)`` for l's tokens,
where ``w_l = PRIORITY_DECAY ** (rank - 1)``. Non-planted neurons read only
language-neutral coordinates with N(0, noise^2) weights and write nothing.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..corpus.languages import LanguageSpec
from ..corpus.tokenizer import VOCAB_SIZE
from ..errors import ValidationError
from ..storage import write_text_artifact
from .checkpoint import Checkpoint
from .config import ModelConfig, expected_shapes

G_HI = 4.0
NOISE_SCALE = 0.02
INDICATOR = 0.25
CONTEXT_GAIN = 1.0
GATE_THRESHOLD = 0.25
OFF_LOGIT = 12.0
ON_MARGIN = 1.1
PRIOR_BIAS = 0.25
VOTE_GAIN = 1.0
DOWN_SCALE = 0.01
PRIORITY_DECAY = 0.85
# 4 layers x 800 neurons: the 1% budget is 32, exactly 4 languages x 8 planted neurons.
PLANT_D_FF = 800
PLANT_PER_LANG = 8

Neuron = tuple[int, int]


@dataclass(frozen=True, slots=True)
class PlantLedger:
    neurons: dict[str, tuple[Neuron, ...]]

    def all_neurons(self) -> set[Neuron]:
        return {n for ns in self.neurons.values() for n in ns}

    def to_json(self) -> dict[str, list[list[int]]]:
        return {lang: [[layer, idx] for layer, idx in sorted(ns)] for lang, ns in sorted(self.neurons.items())}

    @classmethod
    def from_json(cls, data: Mapping[str, Sequence[Sequence[int]]]) -> "PlantLedger":
        return cls({lang: tuple((int(a), int(b)) for a, b in pairs) for lang, pairs in data.items()})


def save_ledger(ledger: PlantLedger, path: str | Path) -> Path:
    return write_text_artifact(path, json.dumps(ledger.to_json(), sort_keys=True, indent=2) + "\n")


def load_ledger(path: str | Path) -> PlantLedger:
    return PlantLedger.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def planted_config(
    *, n_layers: int = 4, d_model: int = 64, d_ff: int = PLANT_D_FF, n_heads: int = 4, max_seq_len: int = 512
) -> ModelConfig:
    return ModelConfig(
        n_layers=n_layers, d_model=d_model, d_ff=d_ff, n_heads=n_heads, vocab_size=VOCAB_SIZE, max_seq_len=max_seq_len
    )


def default_plant(
    langs: Sequence[LanguageSpec], config: ModelConfig, per_lang: int, layers: Sequence[int], seed: int
) -> dict[str, list[Neuron]]:
    """Put each language's neurons in one layer (round-robin over ``layers``) at seeded indices."""

    if not layers:
        raise ValidationError("at least one plant layer is required")
    rng = np.random.default_rng(seed)
    free = {layer: [int(i) for i in rng.permutation(config.d_ff)] for layer in sorted(set(layers))}
    plant: dict[str, list[Neuron]] = {}
    for i, spec in enumerate(sorted(langs, key=lambda s: s.id)):
        layer = layers[i % len(layers)]
        if layer not in free or len(free[layer]) < per_lang:
            raise ValidationError(f"layer {layer} cannot host {per_lang} more planted neurons")
        picked, free[layer] = free[layer][:per_lang], free[layer][per_lang:]
        plant[spec.id] = [(layer, idx) for idx in sorted(picked)]
    return plant


def _silu(z: float) -> float:
    return z / (1.0 + math.exp(-z))


def _validate(langs: Sequence[LanguageSpec], plant: Mapping[str, Sequence[Neuron]], config: ModelConfig) -> None:
    config.validate()
    if config.vocab_size != VOCAB_SIZE:
        raise ValidationError(f"planted models use the byte vocabulary ({VOCAB_SIZE}), got {config.vocab_size}")
    n = len(langs)
    if n == 0:
        raise ValidationError("no languages to plant")
    if 1 + 2 * n > config.d_model or n > config.head_dim:
        raise ValidationError(f"{n} languages exceed the reserved coordinates of d_model={config.d_model}, head_dim={config.head_dim}")
    ids = {s.id for s in langs}
    seen: dict[int, str] = {}
    for spec in langs:
        for cp in spec.alphabet:
            if cp >= 0x80:
                raise ValidationError(f"language {spec.id!r}: planted alphabets must be single-byte, got U+{cp:04X}")
            if cp in seen:
                raise ValidationError(f"languages {seen[cp]!r} and {spec.id!r} share codepoint {chr(cp)!r}")
            seen[cp] = spec.id
    owner: dict[Neuron, str] = {}
    for lang, neurons in plant.items():
        if lang not in ids:
            raise ValidationError(f"plant names unknown language {lang!r}")
        for layer, idx in neurons:
            if not 0 <= layer < config.n_layers or not 0 <= idx < config.d_ff:
                raise ValidationError(f"planted neuron ({layer}, {idx}) out of range")
            if (layer, idx) in owner:
                raise ValidationError(f"planted neuron ({layer}, {idx}) claimed by {owner[(layer, idx)]!r} and {lang!r}")
            owner[(layer, idx)] = lang


def plant_model(
    langs: Sequence[LanguageSpec],
    plant: Mapping[str, Sequence[Neuron]],
    config: ModelConfig | None = None,
    *,
    seed: int = 0,
    g_hi: float = G_HI,
    noise: float = NOISE_SCALE,
) -> tuple[Checkpoint, PlantLedger]:
    config = config or planted_config()
    _validate(langs, plant, config)
    order = sorted(langs, key=lambda s: s.id)
    n, d, eps = len(order), config.d_model, config.norm_eps
    const, ind, out = 0, [1 + i for i in range(n)], [1 + n + i for i in range(n)]
    neutral = [const, *range(1 + 2 * n, d)]
    by_priority = sorted(order, key=lambda s: (s.priority, s.id))
    weight = {s.id: PRIORITY_DECAY**rank for rank, s in enumerate(by_priority)}

    theta = GATE_THRESHOLD * INDICATOR
    h_on = INDICATOR * (1.0 + CONTEXT_GAIN)
    r_in = math.sqrt((1.0 + INDICATOR**2) / d + eps)
    r_nom = math.sqrt((1.0 + h_on**2) / d + eps)
    gate_gain = OFF_LOGIT * r_nom / theta
    z_on = gate_gain * (h_on - theta) / r_nom
    up_gain = ON_MARGIN * g_hi * r_nom / _silu(z_on)

    rng = np.random.default_rng(seed)
    t = {name: np.zeros(shape, dtype=np.float64) for name, shape in expected_shapes(config).items()}
    for name in t:
        if name.endswith("norm"):
            t[name][:] = 1.0

    t["embed"][:, const] = 1.0
    for li, spec in enumerate(order):
        for cp in spec.alphabet:
            t["embed"][cp, ind[li]] = INDICATOR
            t["unembed"][cp, const] = PRIOR_BIAS * weight[spec.id]
            t["unembed"][cp, out[li]] = VOTE_GAIN / DOWN_SCALE

    for li in range(n):
        t["layers.0.wv"][li, ind[li]] = 1.0
        t["layers.0.wo"][ind[li], li] = CONTEXT_GAIN * r_in

    planted = {(layer, idx): lang for lang, ns in plant.items() for layer, idx in ns}
    counts = {lang: max(1, len(ns)) for lang, ns in plant.items()}
    lang_index = {s.id: i for i, s in enumerate(order)}
    for layer in range(config.n_layers):
        gate, up, down = t[f"layers.{layer}.w_gate"], t[f"layers.{layer}.w_up"], t[f"layers.{layer}.w_down"]
        gate[:, neutral] = rng.normal(0.0, noise, size=(config.d_ff, len(neutral)))
        up[:, neutral] = rng.normal(0.0, noise, size=(config.d_ff, len(neutral)))
        for idx in range(config.d_ff):
            lang = planted.get((layer, idx))
            if lang is None:
                continue
            li = lang_index[lang]
            gate[idx, :] = 0.0
            up[idx, :] = 0.0
            gate[idx, ind[li]] = gate_gain
            gate[idx, const] = -gate_gain * theta
            up[idx, const] = up_gain
            down[out[li], idx] = DOWN_SCALE * weight[lang] / counts[lang]

    ckpt = Checkpoint(config=config, tensors={k: v.astype(np.float32) for k, v in t.items()})
    ckpt.validate()
    ledger = PlantLedger({lang: tuple(sorted(ns)) for lang, ns in plant.items()})
    return ckpt, ledger


__all__ = [
    "G_HI",
    "PLANT_D_FF",
    "PLANT_PER_LANG",
    "PlantLedger",
    "default_plant",
    "load_ledger",
    "plant_model",
    "planted_config",
    "save_ledger",
]
