"""Model hyper-parameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

from ..errors import ConfigError


@dataclass(frozen=True, slots=True)
class ModelConfig:
    n_layers: int
    d_model: int
    d_ff: int
    n_heads: int
    vocab_size: int
    max_seq_len: int
    norm_eps: float = 1e-6
    rope_base: float = 10000.0

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def n_neurons(self) -> int:
        """Total tap width over all layers (n_layers * d_ff)."""
        return self.n_layers * self.d_ff

    def validate(self) -> None:
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_heads < 1 or self.d_model < 1:
            raise ConfigError("d_model and n_heads must be >= 1")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.head_dim % 2:
            raise ConfigError(f"head_dim {self.head_dim} must be even for rotary embeddings")
        if self.d_ff < 1:
            raise ConfigError(f"d_ff must be >= 1, got {self.d_ff}")
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.max_seq_len < 1:
            raise ConfigError(f"max_seq_len must be >= 1, got {self.max_seq_len}")
        if not self.norm_eps > 0:
            raise ConfigError(f"norm_eps must be > 0, got {self.norm_eps}")
        if not self.rope_base > 0:
            raise ConfigError(f"rope_base must be > 0, got {self.rope_base}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        try:
            return cls(
                n_layers=int(data["n_layers"]),
                d_model=int(data["d_model"]),
                d_ff=int(data["d_ff"]),
                n_heads=int(data["n_heads"]),
                vocab_size=int(data["vocab_size"]),
                max_seq_len=int(data["max_seq_len"]),
                norm_eps=float(data.get("norm_eps", 1e-6)),
                rope_base=float(data.get("rope_base", 10000.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model config: {exc}") from exc


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Tensor names and shapes, in serialization order. Linear weights are (out, in)."""

    d, f, v = config.d_model, config.d_ff, config.vocab_size
    shapes: dict[str, tuple[int, ...]] = {"embed": (v, d)}
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes[p + "attn_norm"] = (d,)
        shapes[p + "wq"] = (d, d)
        shapes[p + "wk"] = (d, d)
        shapes[p + "wv"] = (d, d)
        shapes[p + "wo"] = (d, d)
        shapes[p + "ffn_norm"] = (d,)
        shapes[p + "w_gate"] = (f, d)
        shapes[p + "w_up"] = (f, d)
        shapes[p + "w_down"] = (d, f)
    shapes["final_norm"] = (d,)
    shapes["unembed"] = (v, d)
    return shapes


__all__ = ["ModelConfig", "expected_shapes"]
