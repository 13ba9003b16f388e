"""Synthetic languages, corpora, byte tokenizer and language classifier."""

from .chain import generate_corpus, stationary_distribution, transition_matrix
from .classify import UNKNOWN, LanguageDistribution, classify, token_membership
from .corpus import Corpus, load_corpus_dir, synthesize_corpus, write_corpus_dir
from .languages import (
    CodepointPool,
    LanguageRegistry,
    LanguageSpec,
    load_registry,
    planted_languages,
    save_registry,
    synth_families,
    synth_family,
)
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, VOCAB_SIZE, detokenize, tokenize

__all__ = [
    "BOS_ID",
    "CodepointPool",
    "Corpus",
    "EOS_ID",
    "LanguageDistribution",
    "LanguageRegistry",
    "LanguageSpec",
    "PAD_ID",
    "UNKNOWN",
    "VOCAB_SIZE",
    "classify",
    "detokenize",
    "generate_corpus",
    "load_corpus_dir",
    "load_registry",
    "planted_languages",
    "save_registry",
    "stationary_distribution",
    "synth_families",
    "synth_family",
    "synthesize_corpus",
    "token_membership",
    "tokenize",
    "transition_matrix",
    "write_corpus_dir",
]
