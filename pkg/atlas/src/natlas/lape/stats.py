"""Per-neuron, per-language activation statistics and the ``NASTAT01`` file.

A token activates a neuron when its tap value is > 0. Value sums are kept in
int64 fixed point (``VALUE_SUM_SCALE`` units per 1.0) so that merging partial
statistics is exactly associative and commutative.
"""

from __future__ import annotations

import asyncio
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensorfile
from ..corpus.corpus import Corpus
from ..corpus.languages import LanguageRegistry
from ..corpus.tokenizer import tokenize
from ..errors import CorpusError, StatsError, ValidationError
from ..hashing import sha256_bytes
from ..logging import jlog
from ..model.checkpoint import Checkpoint
from ..model.transformer import TinyDecoder, forward
from ..storage import write_artifact
from .sketch import DEFAULT_CAPACITY, ColumnSketch

MAGIC = b"NASTAT01"
FORMAT_VERSION = 1
VALUE_SUM_SCALE = 1 << 24


@dataclass(frozen=True, slots=True)
class AccumulateConfig:
    context_len: int = 128
    stride: int = 64
    sketch_capacity: int = DEFAULT_CAPACITY
    workers: int = 1

    def validate(self, max_seq_len: int) -> None:
        if not 1 <= self.context_len <= max_seq_len:
            raise ValidationError(f"context_len must be in [1, {max_seq_len}], got {self.context_len}")
        if not 1 <= self.stride <= self.context_len:
            raise ValidationError(f"stride must be in [1, context_len={self.context_len}], got {self.stride}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")

    def provenance(self) -> dict[str, int]:
        """Fields that must agree for two statistics to be mergeable."""
        return {"context_len": self.context_len, "stride": self.stride, "sketch_capacity": self.sketch_capacity}


def windows(n_tokens: int, context_len: int, stride: int) -> list[tuple[int, int, int]]:
    """(start, end, first_new) per window; positions before ``first_new`` were counted by an earlier window."""

    out: list[tuple[int, int, int]] = []
    counted = 0
    start = 0
    while counted < n_tokens:
        end = min(start + context_len, n_tokens)
        out.append((start, end, counted))
        counted = end
        start += stride
    return out


@dataclass(frozen=True, eq=False)
class ActivationStats:
    languages: tuple[str, ...]
    active_counts: np.ndarray  # (n_layers, d_ff, n_langs) int64
    token_counts: np.ndarray  # (n_langs,) int64
    value_sums: np.ndarray  # (n_layers, d_ff, n_langs) int64, fixed point
    positive_sums: np.ndarray  # same, positive tap values only
    sketches: tuple[tuple[ColumnSketch, ...], ...]  # [layer][language]
    model_digest: str
    config: dict[str, int]
    sources: tuple[str, ...] = ()

    @property
    def n_layers(self) -> int:
        return int(self.active_counts.shape[0])

    @property
    def d_ff(self) -> int:
        return int(self.active_counts.shape[1])

    def lang_index(self, lang: str) -> int:
        try:
            return self.languages.index(lang)
        except ValueError:
            raise StatsError(f"statistics do not cover language {lang!r}") from None

    def value_sum(self, layer: int, neuron: int, lang: str) -> float:
        return int(self.value_sums[layer, neuron, self.lang_index(lang)]) / VALUE_SUM_SCALE

    def mean_activations(self) -> np.ndarray:
        """Mean tap value over all tokens of each language, (n_layers, d_ff, n_langs); 0 where unobserved."""
        totals = self.token_counts.astype(np.float64)[None, None, :]
        sums = self.value_sums.astype(np.float64) / VALUE_SUM_SCALE
        return np.divide(sums, totals, out=np.zeros_like(sums), where=totals > 0)

    def active_means(self) -> np.ndarray:
        """Mean positive tap value over active tokens only; 0 where a neuron never fired."""
        counts = self.active_counts.astype(np.float64)
        sums = self.positive_sums.astype(np.float64) / VALUE_SUM_SCALE
        return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)

    def medians(self, lang: str) -> np.ndarray:
        li = self.lang_index(lang)
        return np.stack([self.sketches[layer][li].quantile(0.5) for layer in range(self.n_layers)])

    def pooled_mean_excluding(self, lang: str) -> np.ndarray:
        """Mean tap over the tokens of every other language, (n_layers, d_ff)."""
        li = self.lang_index(lang)
        others = [i for i in range(len(self.languages)) if i != li]
        total = int(self.token_counts[others].sum()) if others else 0
        if total == 0:
            raise StatsError(f"no tokens observed outside {lang!r}")
        sums = self.value_sums[:, :, others].sum(axis=2).astype(np.float64) / VALUE_SUM_SCALE
        return sums / total

    def max_rank_error(self) -> float:
        return max((sk.rank_error_bound() for row in self.sketches for sk in row), default=0.0)

    def check_consistent(self) -> None:
        shape = self.active_counts.shape
        if len(shape) != 3 or shape[2] != len(self.languages):
            raise StatsError(f"count array shape {shape} does not match {len(self.languages)} languages")
        for name in ("value_sums", "positive_sums"):
            if getattr(self, name).shape != shape:
                raise StatsError(f"{name} shape {getattr(self, name).shape} != {shape}")
        if self.token_counts.shape != (len(self.languages),):
            raise StatsError("token_counts does not match the language list")
        if (self.active_counts < 0).any() or (self.token_counts < 0).any():
            raise StatsError("negative counts")
        if (self.active_counts > self.token_counts[None, None, :]).any():
            raise StatsError("active count exceeds token count")
        if len(self.sketches) != shape[0] or any(len(row) != shape[2] for row in self.sketches):
            raise StatsError("sketch grid does not match layers x languages")

    # --- serialization ----------------------------------------------------

    def to_bytes(self) -> bytes:
        tensors: dict[str, np.ndarray] = {
            "active_counts": self.active_counts,
            "token_counts": self.token_counts,
            "value_sums": self.value_sums,
            "positive_sums": self.positive_sums,
        }
        states = []
        for layer, row in enumerate(self.sketches):
            states.append([sk.state() for sk in row])
            for li, sk in enumerate(row):
                for h, level in enumerate(sk.arrays()):
                    tensors[f"sketch.{layer}.{li}.{h}"] = level
        meta = {
            "format_version": FORMAT_VERSION,
            "languages": list(self.languages),
            "model_digest": self.model_digest,
            "config": self.config,
            "sources": list(self.sources),
            "sketches": states,
        }
        return tensorfile.encode(MAGIC, meta, tensors)

    def digest(self) -> str:
        return sha256_bytes(self.to_bytes())


def stats_from_bytes(payload: bytes) -> ActivationStats:
    tf = tensorfile.decode(payload, MAGIC)
    meta = tf.meta
    if meta.get("format_version") != FORMAT_VERSION:
        raise StatsError(f"unsupported stats format_version {meta.get('format_version')!r}")
    try:
        sketches = tuple(
            tuple(
                ColumnSketch.restore(state, [tf.tensors[f"sketch.{layer}.{li}.{h}"] for h in range(len(state["compactions"]))])
                for li, state in enumerate(row)
            )
            for layer, row in enumerate(meta["sketches"])
        )
        stats = ActivationStats(
            languages=tuple(meta["languages"]),
            active_counts=tf.tensors["active_counts"],
            token_counts=tf.tensors["token_counts"],
            value_sums=tf.tensors["value_sums"],
            positive_sums=tf.tensors["positive_sums"],
            sketches=sketches,
            model_digest=str(meta["model_digest"]),
            config={k: int(v) for k, v in meta["config"].items()},
            sources=tuple(meta.get("sources", ())),
        )
    except (KeyError, TypeError) as exc:
        raise StatsError(f"incomplete stats file: {exc}") from exc
    stats.check_consistent()
    return stats


def load_stats(path: str | Path) -> ActivationStats:
    stats = stats_from_bytes(Path(path).read_bytes())
    jlog("info", event="stats_loaded", path=str(path), languages=list(stats.languages), n_layers=stats.n_layers)
    return stats


def save_stats(stats: ActivationStats, path: str | Path) -> Path:
    return write_artifact(path, stats.to_bytes())


# ============================
# Accumulation
# ============================


class _Accumulator:
    def __init__(self, languages: Sequence[str], n_layers: int, d_ff: int, capacity: int) -> None:
        n = len(languages)
        self.languages = tuple(languages)
        self.active = np.zeros((n_layers, d_ff, n), dtype=np.int64)
        self.tokens = np.zeros(n, dtype=np.int64)
        self.sums = np.zeros((n_layers, d_ff, n), dtype=np.int64)
        self.positive = np.zeros((n_layers, d_ff, n), dtype=np.int64)
        self.sketches = [[ColumnSketch(d_ff, capacity) for _ in range(n)] for _ in range(n_layers)]

    def observe(self, li: int, layer_taps: Sequence[np.ndarray]) -> None:
        """Fold taps of shape (positions, d_ff) per layer into language ``li``."""
        self.tokens[li] += layer_taps[0].shape[0]
        for layer, tap in enumerate(layer_taps):
            fixed = np.rint(tap.astype(np.float64) * VALUE_SUM_SCALE).astype(np.int64)
            on = tap > 0
            self.active[layer, :, li] += on.sum(axis=0)
            self.sums[layer, :, li] += fixed.sum(axis=0)
            self.positive[layer, :, li] += np.where(on, fixed, 0).sum(axis=0)
            self.sketches[layer][li].update(tap)

    def freeze(self, model_digest: str, config: AccumulateConfig, sources: tuple[str, ...]) -> ActivationStats:
        return ActivationStats(
            languages=self.languages,
            active_counts=self.active,
            token_counts=self.tokens,
            value_sums=self.sums,
            positive_sums=self.positive,
            sketches=tuple(tuple(row) for row in self.sketches),
            model_digest=model_digest,
            config=config.provenance(),
            sources=sources,
        )


def _run_shard(
    model: TinyDecoder,
    jobs: Sequence[tuple[int, str, int, bytes]],
    languages: tuple[str, ...],
    config: AccumulateConfig,
) -> _Accumulator:
    acc = _Accumulator(languages, model.config.n_layers, model.config.d_ff, config.sketch_capacity)
    for li, lang, doc_id, doc in jobs:
        tokens = tokenize(doc)
        for start, end, first_new in windows(len(tokens), config.context_len, config.stride):
            try:
                result = forward(model, tokens[start:end])
            except ValidationError as exc:
                raise CorpusError(f"language {lang!r} document {doc_id}: {exc}") from exc
            keep = first_new - start
            acc.observe(li, [t.values[keep:].numpy() for t in result.taps])
    return acc


async def _run_shards(
    model: TinyDecoder, shards: list[list[tuple[int, str, int, bytes]]], languages: tuple[str, ...], config: AccumulateConfig
) -> list[_Accumulator]:
    return list(await asyncio.gather(*(asyncio.to_thread(_run_shard, model, shard, languages, config) for shard in shards)))


def accumulate(
    ckpt: Checkpoint,
    corpus: Corpus,
    config: AccumulateConfig = AccumulateConfig(),
    *,
    registry: LanguageRegistry | None = None,
) -> ActivationStats:
    """Stream every document through the model in overlapping windows.

    Each token position is counted once: a window only contributes the
    positions not covered by the previous window of the same document.
    Documents are split into ``config.workers`` contiguous shards in
    (language, document) order and the partial results merged in shard order.
    """

    config.validate(ckpt.config.max_seq_len)
    if registry is not None:
        corpus.check_registered(registry)
    if corpus.is_empty():
        raise CorpusError("cannot accumulate statistics over an empty corpus")
    model = TinyDecoder.from_checkpoint(ckpt)
    digest = ckpt.digest()
    languages = corpus.languages
    jobs = [(li, lang, d, doc) for li, lang in enumerate(languages) for d, doc in enumerate(corpus.documents[lang])]
    n_shards = min(config.workers, len(jobs))
    bounds = np.linspace(0, len(jobs), n_shards + 1).astype(int)
    shards = [jobs[bounds[i] : bounds[i + 1]] for i in range(n_shards)]
    jlog("info", event="accumulate_start", languages=list(languages), documents=len(jobs), shards=n_shards, **config.provenance())

    partials = asyncio.run(_run_shards(model, shards, languages, config))
    stats = partials[0].freeze(digest, config, (corpus.provenance,))
    for part in partials[1:]:
        stats = merge(stats, part.freeze(digest, config, ()))

    jlog(
        "info",
        event="accumulate_done",
        tokens={lang: int(n) for lang, n in zip(languages, stats.token_counts)},
        max_rank_error=round(stats.max_rank_error(), 6),
    )
    return stats


def _aligned(stats: ActivationStats, languages: tuple[str, ...]) -> tuple[list[np.ndarray], list[list[ColumnSketch | None]]]:
    n_layers, d_ff = stats.n_layers, stats.d_ff
    arrays = []
    for arr in (stats.active_counts, stats.value_sums, stats.positive_sums):
        out = np.zeros((n_layers, d_ff, len(languages)), dtype=np.int64)
        for li, lang in enumerate(languages):
            if lang in stats.languages:
                out[:, :, li] = arr[:, :, stats.lang_index(lang)]
        arrays.append(out)
    tokens = np.array([stats.token_counts[stats.lang_index(lang)] if lang in stats.languages else 0 for lang in languages], dtype=np.int64)
    arrays.append(tokens)
    sketches: list[list[ColumnSketch | None]] = [
        [stats.sketches[layer][stats.lang_index(lang)] if lang in stats.languages else None for lang in languages]
        for layer in range(n_layers)
    ]
    return arrays, sketches


def merge(a: ActivationStats, b: ActivationStats) -> ActivationStats:
    """Combine statistics of two disjoint corpora gathered with the same model and config."""

    if a.model_digest != b.model_digest or a.config != b.config:
        raise StatsError("cannot merge statistics with different model or accumulation provenance")
    if (a.n_layers, a.d_ff) != (b.n_layers, b.d_ff):
        raise StatsError("cannot merge statistics of different shapes")
    languages = tuple(sorted(set(a.languages) | set(b.languages)))
    (act_a, sum_a, pos_a, tok_a), sk_a = _aligned(a, languages)
    (act_b, sum_b, pos_b, tok_b), sk_b = _aligned(b, languages)
    capacity = a.config.get("sketch_capacity", DEFAULT_CAPACITY)
    sketches = []
    for layer in range(a.n_layers):
        row = []
        for x, y in zip(sk_a[layer], sk_b[layer]):
            if x is not None and y is not None:
                row.append(x.merge(y))
            else:
                base = x if x is not None else y
                row.append(base.merge(ColumnSketch(a.d_ff, capacity)) if base is not None else ColumnSketch(a.d_ff, capacity))
        sketches.append(tuple(row))
    return ActivationStats(
        languages=languages,
        active_counts=act_a + act_b,
        token_counts=tok_a + tok_b,
        value_sums=sum_a + sum_b,
        positive_sums=pos_a + pos_b,
        sketches=tuple(sketches),
        model_digest=a.model_digest,
        config=dict(a.config),
        sources=a.sources + b.sources,
    )


__all__ = [
    "AccumulateConfig",
    "ActivationStats",
    "MAGIC",
    "VALUE_SUM_SCALE",
    "accumulate",
    "load_stats",
    "merge",
    "save_stats",
    "stats_from_bytes",
    "windows",
]
