"""Greedy / sampled decoding with repetition penalty."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

from ..corpus.tokenizer import EOS_ID
from ..errors import ValidationError
from .directives import TapDirective, compile_directives
from .transformer import TinyDecoder

DEFAULT_MAX_TOKENS = 256
DEFAULT_REPETITION_PENALTY = 1.1


@dataclass(frozen=True, slots=True)
class GenerationSettings:
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0
    repetition_penalty: float = DEFAULT_REPETITION_PENALTY
    stop_ids: tuple[int, ...] = (EOS_ID,)
    seed: int = 0

    def validate(self) -> None:
        if self.max_tokens < 1:
            raise ValidationError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if self.repetition_penalty <= 0:
            raise ValidationError(f"repetition_penalty must be > 0, got {self.repetition_penalty}")


def apply_repetition_penalty(logits: np.ndarray, seen: Sequence[int], penalty: float) -> np.ndarray:
    """Divide positive and multiply negative logits of already emitted tokens."""

    if penalty == 1.0 or not seen:
        return logits
    out = logits.copy()
    idx = np.fromiter(sorted(set(seen)), dtype=np.int64)
    vals = out[idx]
    out[idx] = np.where(vals > 0, vals / penalty, vals * penalty)
    return out


def generate(
    model: TinyDecoder,
    prompt: Sequence[int],
    directives: Sequence[TapDirective] = (),
    settings: GenerationSettings = GenerationSettings(),
) -> list[int]:
    """Return the generated continuation (prompt and stop token excluded).

    The context is the last ``max_seq_len`` tokens; directives apply to every
    position on every step.
    """

    settings.validate()
    model.check_tokens(prompt)
    edits = compile_directives(directives, model.config) if directives else None
    rng = np.random.default_rng(settings.seed) if settings.temperature > 0 else None
    context = [int(t) for t in prompt]
    emitted: list[int] = []
    window = model.config.max_seq_len
    with torch.inference_mode():
        for _ in range(settings.max_tokens):
            ids = torch.tensor([context[-window:]], dtype=torch.long)
            logits, _, _ = model.run(ids, edits)
            row = logits[0, -1].to(torch.float64).numpy()
            row = apply_repetition_penalty(row, emitted, settings.repetition_penalty)
            if rng is None:
                nxt = int(np.argmax(row))
            else:
                z = row / settings.temperature
                p = np.exp(z - z.max())
                nxt = int(rng.choice(len(p), p=p / p.sum()))
            if nxt in settings.stop_ids:
                break
            emitted.append(nxt)
            context.append(nxt)
    return emitted


__all__ = ["DEFAULT_MAX_TOKENS", "GenerationSettings", "apply_repetition_penalty", "generate"]
