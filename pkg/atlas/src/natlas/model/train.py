"""Seeded initialization and the tiny next-token trainer."""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch
import torch.nn.functional as F

from ..corpus.corpus import Corpus
from ..corpus.tokenizer import EOS_ID
from ..errors import CorpusError, DivergenceError, ValidationError
from ..logging import jlog
from .checkpoint import Checkpoint
from .config import ModelConfig
from .transformer import TinyDecoder

INIT_STD = 0.02
BETAS = (0.9, 0.95)
WEIGHT_DECAY = 0.01
GRAD_CLIP = 1.0
MIN_LR_FRACTION = 0.1


@dataclass(frozen=True, slots=True)
class TrainHyper:
    steps: int
    lr: float = 3e-3
    batch: int = 16
    seed: int = 0
    seq_len: int | None = None
    log_every: int = 100

    def validate(self, config: ModelConfig) -> None:
        if self.steps < 0:
            raise ValidationError(f"steps must be >= 0, got {self.steps}")
        if self.batch < 1:
            raise ValidationError(f"batch must be >= 1, got {self.batch}")
        if not self.lr > 0:
            raise ValidationError(f"lr must be > 0, got {self.lr}")
        if self.seq_len is not None and not 1 <= self.seq_len <= config.max_seq_len:
            raise ValidationError(f"seq_len must be in [1, {config.max_seq_len}], got {self.seq_len}")


def _init_model(config: ModelConfig, seed: int) -> TinyDecoder:
    model = TinyDecoder(config)
    gen = torch.Generator().manual_seed(seed)
    resid_std = INIT_STD / math.sqrt(2 * config.n_layers)
    with torch.no_grad():
        for name, param in model._named().items():
            if name.endswith("norm"):
                param.fill_(1.0)
            elif name.endswith(".wo") or name.endswith(".w_down"):
                param.normal_(0.0, resid_std, generator=gen)
            else:
                param.normal_(0.0, INIT_STD, generator=gen)
    return model


def init_checkpoint(config: ModelConfig, seed: int) -> Checkpoint:
    return _init_model(config, seed).to_checkpoint()


def lr_at(step: int, steps: int, lr: float) -> float:
    """Linear warm-up over min(100, steps // 10) steps, then cosine decay to 10% of lr."""

    warmup = min(100, steps // 10)
    if warmup and step < warmup:
        return lr * (step + 1) / warmup
    span = max(1, steps - warmup)
    progress = min(1.0, (step - warmup) / span)
    return lr * (MIN_LR_FRACTION + (1 - MIN_LR_FRACTION) * 0.5 * (1 + math.cos(math.pi * progress)))


def _streams(corpus: Corpus) -> list[np.ndarray]:
    """One token stream per language (documents joined by eos), in language-id order."""
    out = []
    for lang in corpus.languages:
        ids: list[int] = []
        for doc in corpus.documents[lang]:
            ids.extend(doc)
            ids.append(EOS_ID)
        out.append(np.asarray(ids, dtype=np.int64))
    return out


@contextmanager
def _deterministic_torch() -> Iterator[None]:
    threads = torch.get_num_threads()
    was_deterministic = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True, warn_only=True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(was_deterministic)
        torch.set_num_threads(threads)


def train_tiny(corpus: Corpus, config: ModelConfig, hyper: TrainHyper) -> Checkpoint:
    """Next-token cross-entropy training; batches cycle through languages in id order."""

    config.validate()
    hyper.validate(config)
    if corpus.is_empty():
        raise CorpusError("cannot train on an empty corpus")
    seq_len = hyper.seq_len or min(64, config.max_seq_len)
    streams = [s for s in _streams(corpus) if len(s) > 0]
    short = [lang for lang, s in zip(corpus.languages, _streams(corpus)) if 0 < len(s) <= seq_len]
    if short:
        raise CorpusError(f"language {short[0]!r} has fewer than seq_len + 1 = {seq_len + 1} tokens")

    with _deterministic_torch():
        model = _init_model(config, hyper.seed)
        if hyper.steps == 0:
            return model.to_checkpoint()
        model.train()
        opt = torch.optim.AdamW(model.parameters(), lr=hyper.lr, betas=BETAS, weight_decay=WEIGHT_DECAY)
        rng = np.random.default_rng(hyper.seed)
        first_loss: float | None = None
        loss_value = float("nan")
        jlog("info", event="train_start", steps=hyper.steps, batch=hyper.batch, seq_len=seq_len, languages=list(corpus.languages))
        for step in range(hyper.steps):
            rows = []
            for b in range(hyper.batch):
                stream = streams[(step * hyper.batch + b) % len(streams)]
                start = int(rng.integers(0, len(stream) - seq_len))
                rows.append(stream[start : start + seq_len + 1])
            batch = torch.from_numpy(np.stack(rows))
            for group in opt.param_groups:
                group["lr"] = lr_at(step, hyper.steps, hyper.lr)
            logits, _, _ = model.run(batch[:, :-1])
            loss = F.cross_entropy(logits.reshape(-1, config.vocab_size), batch[:, 1:].reshape(-1))
            loss_value = float(loss.item())
            if not math.isfinite(loss_value):
                jlog("error", event="train_diverged", step=step, loss=loss_value)
                raise DivergenceError(step, loss_value)
            if first_loss is None:
                first_loss = loss_value
            opt.zero_grad(set_to_none=True)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), GRAD_CLIP)
            opt.step()
            if hyper.log_every and (step % hyper.log_every == 0 or step == hyper.steps - 1):
                jlog("info", event="train_step", step=step, loss=round(loss_value, 6), lr=lr_at(step, hyper.steps, hyper.lr))
        jlog("info", event="train_done", steps=hyper.steps, first_loss=first_loss, final_loss=loss_value)
        model.eval()
        return model.to_checkpoint()


__all__ = ["TrainHyper", "init_checkpoint", "lr_at", "train_tiny"]
