"""Seeded first-order Markov chains over a language's alphabet."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ValidationError
from ..hashing import derive_seed
from .languages import LanguageSpec

DIRICHLET_ALPHA = 1.0


@lru_cache(maxsize=256)
def _transition(letters: tuple[int, ...], bigram_seed: int) -> np.ndarray:
    rng = np.random.default_rng(bigram_seed)
    n = len(letters)
    mat = rng.dirichlet(np.full(n, DIRICHLET_ALPHA), size=n)
    mat.setflags(write=False)
    return mat


def transition_matrix(spec: LanguageSpec) -> np.ndarray:
    """Row-stochastic matrix indexed by ``spec.letters`` order."""
    return _transition(spec.letters, spec.bigram_seed)


def stationary_distribution(spec: LanguageSpec, *, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Power iteration from the uniform distribution."""

    mat = transition_matrix(spec)
    pi = np.full(mat.shape[0], 1.0 / mat.shape[0])
    for _ in range(max_iter):
        nxt = pi @ mat
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    return pi


def generate_corpus(spec: LanguageSpec, n_docs: int, doc_len: int, seed: int) -> list[str]:
    """``n_docs`` documents of ``doc_len`` codepoints sampled from the chain."""

    if doc_len < 1:
        raise ValidationError(f"doc_len must be >= 1, got {doc_len}")
    if n_docs < 0:
        raise ValidationError(f"n_docs must be >= 0, got {n_docs}")
    letters = np.array(spec.letters, dtype=np.int64)
    cumulative = np.cumsum(transition_matrix(spec), axis=1)
    cumulative[:, -1] = 1.0
    docs = []
    for d in range(n_docs):
        rng = np.random.default_rng(derive_seed(seed, spec.id, d))
        draws = rng.random(doc_len)
        state = int(rng.integers(len(letters)))
        out = np.empty(doc_len, dtype=np.int64)
        out[0] = state
        for i in range(1, doc_len):
            state = int(np.searchsorted(cumulative[state], draws[i], side="right"))
            out[i] = state
        docs.append("".join(map(chr, letters[out])))
    return docs


def bigram_log_probs(spec: LanguageSpec) -> dict[tuple[int, int], float]:
    """log P(b | a) for every bigram of alphabet letters."""

    mat = transition_matrix(spec)
    letters = spec.letters
    logs = np.log(mat)
    return {(a, b): float(logs[i, j]) for i, a in enumerate(letters) for j, b in enumerate(letters)}


__all__ = ["bigram_log_probs", "generate_corpus", "stationary_distribution", "transition_matrix"]
