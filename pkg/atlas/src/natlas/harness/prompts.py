"""Synthetic question prompts in a shared ``Q: ... A:`` frame."""

from __future__ import annotations

from ..corpus.chain import generate_corpus
from ..corpus.languages import LanguageRegistry, LanguageSpec
from ..errors import ValidationError
from ..hashing import derive_seed

QUESTION_FRAME = "Q: {body}? A:"
FORCING_QUESTIONS = 6
FALLBACK_PROMPTS = 70
WORDS_PER_QUESTION = 3
WORD_LEN = 5


def question(spec: LanguageSpec, index: int, seed: int, *, n_words: int = WORDS_PER_QUESTION, word_len: int = WORD_LEN) -> str:
    words = generate_corpus(spec, n_words, word_len, derive_seed(seed, "question", index))
    return QUESTION_FRAME.format(body=" ".join(words))


def language_questions(spec: LanguageSpec, n: int, seed: int) -> list[str]:
    if n < 1:
        raise ValidationError(f"need at least one question per language, got {n}")
    return [question(spec, i, seed) for i in range(n)]


def forcing_questions(registry: LanguageRegistry, seed: int, n: int = FORCING_QUESTIONS) -> dict[str, list[str]]:
    return {spec.id: language_questions(spec, n, seed) for spec in registry}


def fallback_prompts(registry: LanguageRegistry, seed: int, n: int = FALLBACK_PROMPTS, *, language: str | None = None) -> list[str]:
    """Prompts in one language, the registry's pivot by default."""
    spec = registry[language or registry.pivot()]
    return language_questions(spec, n, derive_seed(seed, "fallback"))


__all__ = [
    "FALLBACK_PROMPTS",
    "FORCING_QUESTIONS",
    "QUESTION_FRAME",
    "fallback_prompts",
    "forcing_questions",
    "language_questions",
    "question",
]
