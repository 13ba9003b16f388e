"""Deterministic script/bigram language classifier and token membership."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chain import bigram_log_probs
from .languages import LanguageRegistry, LanguageSpec
from .tokenizer import N_BYTES, VOCAB_SIZE

UNKNOWN = "unknown"
MEMBERSHIP_WEIGHT = 0.7
BIGRAM_WEIGHT = 0.3
LLR_CLIP = 3.0
SOFTMAX_SHARPNESS = 10.0
MIN_BIGRAM_BYTES = 4


@dataclass(frozen=True, slots=True)
class LanguageDistribution:
    probs: Mapping[str, float]
    unknown: float

    def top1(self) -> str:
        """Highest-mass outcome; ties go to the smaller language id, unknown loses ties."""
        best, best_p = UNKNOWN, self.unknown
        for lang in sorted(self.probs):
            p = self.probs[lang]
            if p > best_p or (p == best_p and best == UNKNOWN):
                best, best_p = lang, p
        return best

    def total(self) -> float:
        return math.fsum(self.probs.values()) + self.unknown

    def as_dict(self) -> dict[str, float]:
        return {**{k: self.probs[k] for k in sorted(self.probs)}, UNKNOWN: self.unknown}


@lru_cache(maxsize=128)
def _scored_bigrams(spec: LanguageSpec) -> dict[tuple[int, int], float]:
    log_size = math.log(len(spec.alphabet))
    return {k: v + log_size for k, v in bigram_log_probs(spec).items()}


def _bigram_score(spec: LanguageSpec, codepoints: list[int]) -> float:
    """Mean per-bigram LLR against a uniform model over the alphabet, scaled to [-1, 1]."""
    table = _scored_bigrams(spec)
    pairs = list(zip(codepoints, codepoints[1:]))
    total = math.fsum(table.get(pair, -LLR_CLIP) for pair in pairs)
    mean = total / len(pairs)
    return max(-LLR_CLIP, min(LLR_CLIP, mean)) / LLR_CLIP


def classify(text: str, registry: LanguageRegistry) -> LanguageDistribution:
    """Softmax over 0.7 x alphabet membership + 0.3 x mean bigram LLR; foreign characters are unknown mass.

    The bigram term scores how plausible the character sequence is under each
    language's chain, so a mixed text does not split evenly by character count:
    "abcghi" leans towards whichever half is likelier under its own chain.
    Bigrams that straddle two languages score the floor for every language, so
    the order of whole single-language blocks does not change the result.
    """

    codepoints = [ord(c) for c in text]
    langs = list(registry)
    if not codepoints:
        return LanguageDistribution(probs={s.id: 0.0 for s in langs}, unknown=1.0)
    n = len(codepoints)
    known = set().union(*(s.alphabet for s in langs))
    unknown = sum(1 for c in codepoints if c not in known) / n
    if unknown == 1.0:
        return LanguageDistribution(probs={s.id: 0.0 for s in langs}, unknown=1.0)

    membership = np.array([sum(1 for c in codepoints if c in s.alphabet) / n for s in langs])
    if len(text.encode("utf-8")) < MIN_BIGRAM_BYTES or n < 2:
        scores = membership
    else:
        llr = np.array([_bigram_score(s, codepoints) for s in langs])
        scores = MEMBERSHIP_WEIGHT * membership + BIGRAM_WEIGHT * llr
    z = SOFTMAX_SHARPNESS * scores
    w = np.exp(z - z.max())
    probs = (1.0 - unknown) * w / w.sum()
    return LanguageDistribution(probs={s.id: float(p) for s, p in zip(langs, probs)}, unknown=unknown)


def token_membership(registry: LanguageRegistry) -> np.ndarray:
    """(vocab, n_langs + 1) row-stochastic matrix; the last column is unknown.

    A byte token belongs uniformly to every language whose alphabet, encoded
    as UTF-8, contains that byte. Special tokens and unclaimed bytes are unknown.
    """

    langs = list(registry)
    claims: list[set[int]] = [set() for _ in range(N_BYTES)]
    for li, spec in enumerate(langs):
        for cp in spec.alphabet:
            for b in chr(cp).encode("utf-8"):
                claims[b].add(li)
    mat = np.zeros((VOCAB_SIZE, len(langs) + 1), dtype=np.float64)
    for tok in range(VOCAB_SIZE):
        owners = claims[tok] if tok < N_BYTES else set()
        if owners:
            for li in owners:
                mat[tok, li] = 1.0 / len(owners)
        else:
            mat[tok, -1] = 1.0
    return mat


__all__ = ["LanguageDistribution", "UNKNOWN", "classify", "token_membership"]
