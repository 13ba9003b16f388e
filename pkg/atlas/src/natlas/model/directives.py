"""Tap directives: edits applied to the post-gate FFN activation.

Within a layer every multiply runs first, then every add, then every set, each
group in list order. A directive with ``indices=None`` targets all d_ff neurons.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import torch

from ..errors import DirectiveError
from .config import ModelConfig


class DirectiveMode(str, Enum):
    MULTIPLY = "multiply"
    ADD = "add"
    SET = "set"


_MODE_ORDER = {DirectiveMode.MULTIPLY: 0, DirectiveMode.ADD: 1, DirectiveMode.SET: 2}


@dataclass(frozen=True, slots=True)
class TapDirective:
    layer: int
    mode: DirectiveMode
    indices: tuple[int, ...] | None
    values: float | tuple[float, ...]

    @property
    def is_dense(self) -> bool:
        return self.indices is None

    def width(self, d_ff: int) -> int:
        return d_ff if self.indices is None else len(self.indices)

    def value_at(self, position: int) -> float:
        return float(self.values) if isinstance(self.values, float) else float(self.values[position])

    def validate(self, config: ModelConfig) -> None:
        if not 0 <= self.layer < config.n_layers:
            raise DirectiveError(f"directive layer {self.layer} out of range [0, {config.n_layers})")
        if self.indices is not None:
            if not self.indices:
                raise DirectiveError(f"layer {self.layer}: empty neuron index list")
            bad = [i for i in self.indices if not 0 <= i < config.d_ff]
            if bad:
                raise DirectiveError(f"layer {self.layer}: neuron index {bad[0]} out of range [0, {config.d_ff})")
            if len(set(self.indices)) != len(self.indices):
                raise DirectiveError(f"layer {self.layer}: duplicate neuron indices")
        if self.mode is DirectiveMode.MULTIPLY and not isinstance(self.values, float):
            raise DirectiveError("multiply takes a single scalar")
        if isinstance(self.values, tuple) and len(self.values) != self.width(config.d_ff):
            raise DirectiveError(f"layer {self.layer}: {len(self.values)} values for {self.width(config.d_ff)} targets")

    def to_json(self) -> dict[str, Any]:
        return {
            "layer": self.layer,
            "mode": self.mode.value,
            "indices": None if self.indices is None else list(self.indices),
            "values": self.values if isinstance(self.values, float) else list(self.values),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TapDirective":
        try:
            raw = data["values"]
            values: float | tuple[float, ...] = float(raw) if isinstance(raw, (int, float)) else tuple(float(v) for v in raw)
            indices = data.get("indices")
            return cls(
                layer=int(data["layer"]),
                mode=DirectiveMode(data["mode"]),
                indices=None if indices is None else tuple(int(i) for i in indices),
                values=values,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DirectiveError(f"malformed directive {data!r}: {exc}") from exc


def add(layer: int, values: float | Sequence[float], indices: Sequence[int] | None = None) -> TapDirective:
    vals = float(values) if isinstance(values, (int, float)) else tuple(float(v) for v in values)
    return TapDirective(layer, DirectiveMode.ADD, None if indices is None else tuple(indices), vals)


def multiply(layer: int, scalar: float, indices: Sequence[int] | None = None) -> TapDirective:
    return TapDirective(layer, DirectiveMode.MULTIPLY, None if indices is None else tuple(indices), float(scalar))


def set_to(layer: int, values: float | Sequence[float], indices: Sequence[int] | None = None) -> TapDirective:
    vals = float(values) if isinstance(values, (int, float)) else tuple(float(v) for v in values)
    return TapDirective(layer, DirectiveMode.SET, None if indices is None else tuple(indices), vals)


@dataclass(slots=True)
class LayerEdits:
    """Compiled edits for one layer: (index tensor or None, value tensor) per mode."""

    steps: list[tuple[DirectiveMode, torch.Tensor | None, torch.Tensor]] = field(default_factory=list)

    def apply(self, act: torch.Tensor) -> torch.Tensor:
        out = act.clone()
        for mode, idx, val in self.steps:
            if mode is DirectiveMode.MULTIPLY:
                if idx is None:
                    out.mul_(val)
                else:
                    out[..., idx] = out[..., idx] * val
            elif mode is DirectiveMode.ADD:
                if idx is None:
                    out.add_(val)
                else:
                    out[..., idx] = out[..., idx] + val
            elif idx is None:
                out.copy_(val.expand_as(out))
            else:
                out[..., idx] = val.expand(*out.shape[:-1], idx.numel())
        return out


def compile_directives(directives: Sequence[TapDirective], config: ModelConfig) -> dict[int, LayerEdits]:
    """Validate and group directives per layer in application order."""

    for d in directives:
        d.validate(config)
    ordered = sorted(enumerate(directives), key=lambda item: (item[1].layer, _MODE_ORDER[item[1].mode], item[0]))
    compiled: dict[int, LayerEdits] = {}
    for _, d in ordered:
        idx = None if d.indices is None else torch.tensor(d.indices, dtype=torch.long)
        width = d.width(config.d_ff)
        if isinstance(d.values, float):
            val = torch.tensor(d.values, dtype=torch.float32)
            if d.mode is not DirectiveMode.MULTIPLY:
                val = val.expand(width).contiguous()
        else:
            val = torch.tensor(d.values, dtype=torch.float32)
        compiled.setdefault(d.layer, LayerEdits()).steps.append((d.mode, idx, val))
    return compiled


__all__ = ["DirectiveMode", "LayerEdits", "TapDirective", "add", "compile_directives", "multiply", "set_to"]
