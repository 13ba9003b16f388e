"""Tiny decoder-only transformer with a gated SiLU FFN and an activation tap.

The tap sits after ``silu(gate(x)) * up(x)``, i.e. exactly the tensor the
down-projection consumes. Directives are passed per call, so one model can
serve concurrent forwards.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ValidationError
from .checkpoint import Checkpoint
from .config import ModelConfig, expected_shapes
from .directives import LayerEdits, TapDirective, compile_directives


class RMSNorm(nn.Module):
    def __init__(self, dim: int, eps: float) -> None:
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * torch.rsqrt(x.pow(2).mean(-1, keepdim=True) + self.eps) * self.weight


def rope_tables(seq_len: int, head_dim: int, base: float) -> tuple[torch.Tensor, torch.Tensor]:
    inv_freq = 1.0 / (base ** (torch.arange(0, head_dim, 2, dtype=torch.float32) / head_dim))
    angles = torch.outer(torch.arange(seq_len, dtype=torch.float32), inv_freq)
    return angles.cos(), angles.sin()


def apply_rope(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    half = x.shape[-1] // 2
    x1, x2 = x[..., :half], x[..., half:]
    return torch.cat([x1 * cos - x2 * sin, x1 * sin + x2 * cos], dim=-1)


class CausalSelfAttention(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        d = config.d_model
        self.n_heads = config.n_heads
        self.head_dim = config.head_dim
        self.rope_base = config.rope_base
        self.wq = nn.Linear(d, d, bias=False)
        self.wk = nn.Linear(d, d, bias=False)
        self.wv = nn.Linear(d, d, bias=False)
        self.wo = nn.Linear(d, d, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        q = self.wq(x).view(b, n, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.wk(x).view(b, n, self.n_heads, self.head_dim).transpose(1, 2)
        v = self.wv(x).view(b, n, self.n_heads, self.head_dim).transpose(1, 2)
        cos, sin = rope_tables(n, self.head_dim, self.rope_base)
        q, k = apply_rope(q, cos, sin), apply_rope(k, cos, sin)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        mask = torch.ones(n, n, dtype=torch.bool).triu(1)
        scores = scores.masked_fill(mask, float("-inf"))
        out = F.softmax(scores, dim=-1) @ v
        return self.wo(out.transpose(1, 2).reshape(b, n, d))


class GatedFFN(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.w_gate = nn.Linear(config.d_model, config.d_ff, bias=False)
        self.w_up = nn.Linear(config.d_model, config.d_ff, bias=False)
        self.w_down = nn.Linear(config.d_ff, config.d_model, bias=False)

    def activation(self, x: torch.Tensor) -> torch.Tensor:
        return F.silu(self.w_gate(x)) * self.w_up(x)

    def forward(self, x: torch.Tensor, edits: LayerEdits | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        act = self.activation(x)
        if edits is not None:
            act = edits.apply(act)
        return self.w_down(act), act


class Block(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.attn_norm = RMSNorm(config.d_model, config.norm_eps)
        self.attn = CausalSelfAttention(config)
        self.ffn_norm = RMSNorm(config.d_model, config.norm_eps)
        self.ffn = GatedFFN(config)

    def forward(self, x: torch.Tensor, edits: LayerEdits | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        h = x + self.attn(self.attn_norm(x))
        out, tap = self.ffn(self.ffn_norm(h), edits)
        return h + out, tap


@dataclass(frozen=True, slots=True)
class ActivationTap:
    layer: int
    values: torch.Tensor  # (L, d_ff)


@dataclass(frozen=True, slots=True)
class ForwardResult:
    logits: torch.Tensor  # (L, vocab)
    taps: tuple[ActivationTap, ...]
    hiddens: tuple[torch.Tensor, ...]  # residual after each block, (L, d_model)


class TinyDecoder(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        config.validate()
        self.config = config
        self.embed = nn.Embedding(config.vocab_size, config.d_model)
        self.layers = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.final_norm = RMSNorm(config.d_model, config.norm_eps)
        self.unembed = nn.Linear(config.d_model, config.vocab_size, bias=False)

    # --- weights <-> checkpoint -------------------------------------------

    def _named(self) -> dict[str, torch.Tensor]:
        named: dict[str, torch.Tensor] = {"embed": self.embed.weight}
        for i, blk in enumerate(self.layers):
            p = f"layers.{i}."
            named[p + "attn_norm"] = blk.attn_norm.weight
            named[p + "wq"] = blk.attn.wq.weight
            named[p + "wk"] = blk.attn.wk.weight
            named[p + "wv"] = blk.attn.wv.weight
            named[p + "wo"] = blk.attn.wo.weight
            named[p + "ffn_norm"] = blk.ffn_norm.weight
            named[p + "w_gate"] = blk.ffn.w_gate.weight
            named[p + "w_up"] = blk.ffn.w_up.weight
            named[p + "w_down"] = blk.ffn.w_down.weight
        named["final_norm"] = self.final_norm.weight
        named["unembed"] = self.unembed.weight
        return named

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TinyDecoder":
        ckpt.validate()
        model = cls(ckpt.config)
        with torch.no_grad():
            for name, param in model._named().items():
                param.copy_(torch.from_numpy(np.array(ckpt.tensors[name], dtype=np.float32)))
        model.eval()
        return model

    def to_checkpoint(self) -> Checkpoint:
        named = self._named()
        tensors = {name: named[name].detach().cpu().numpy().astype(np.float32, copy=True) for name in expected_shapes(self.config)}
        return Checkpoint(config=self.config, tensors=tensors)

    # --- computation ------------------------------------------------------

    def project(self, hidden: torch.Tensor) -> torch.Tensor:
        """Final norm + unembedding; the one path shared by the head and the lens."""
        return self.unembed(self.final_norm(hidden))

    def run(
        self, tokens: torch.Tensor, edits: dict[int, LayerEdits] | None = None
    ) -> tuple[torch.Tensor, list[torch.Tensor], list[torch.Tensor]]:
        """Batched forward over ``tokens`` of shape (B, L)."""
        x = self.embed(tokens)
        taps: list[torch.Tensor] = []
        hiddens: list[torch.Tensor] = []
        for i, blk in enumerate(self.layers):
            x, tap = blk(x, None if edits is None else edits.get(i))
            taps.append(tap)
            hiddens.append(x)
        return self.project(x), taps, hiddens

    def check_tokens(self, tokens: Sequence[int]) -> None:
        if len(tokens) == 0:
            raise ValidationError("token sequence is empty")
        if len(tokens) > self.config.max_seq_len:
            raise ValidationError(f"sequence length {len(tokens)} exceeds max_seq_len {self.config.max_seq_len}")
        for t in tokens:
            if not 0 <= int(t) < self.config.vocab_size:
                raise ValidationError(f"token id {t} out of range [0, {self.config.vocab_size})")


def forward(model: TinyDecoder, tokens: Sequence[int], directives: Sequence[TapDirective] = ()) -> ForwardResult:
    """Single-sequence forward with optional tap directives."""

    model.check_tokens(tokens)
    edits = compile_directives(directives, model.config) if directives else None
    with torch.inference_mode():
        ids = torch.tensor([list(tokens)], dtype=torch.long)
        logits, taps, hiddens = model.run(ids, edits)
    return ForwardResult(
        logits=logits[0],
        taps=tuple(ActivationTap(layer=i, values=t[0]) for i, t in enumerate(taps)),
        hiddens=tuple(h[0] for h in hiddens),
    )


__all__ = ["ActivationTap", "ForwardResult", "GatedFFN", "RMSNorm", "TinyDecoder", "forward"]
