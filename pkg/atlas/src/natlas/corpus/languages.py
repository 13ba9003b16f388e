"""Synthetic language specs, codepoint allocation and the language registry."""

from __future__ import annotations

import json
import math
import string
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from ..errors import CorpusError, ValidationError
from ..hashing import derive_seed
from ..storage import write_text_artifact

REGISTRY_SCHEMA_VERSION = 1

# Single-byte codepoints; planted models need one byte per character.
ASCII_POOL: tuple[int, ...] = tuple(ord(c) for c in string.ascii_lowercase)
# Letters only, no combining marks.
EXTENDED_POOL: tuple[int, ...] = tuple(
    [*range(0x0100, 0x0250), *range(0x0400, 0x0482), *range(0x048A, 0x0500), *range(0x0531, 0x0557), *range(0x05D0, 0x05EB)]
)


@dataclass(frozen=True, slots=True)
class LanguageSpec:
    id: str
    alphabet: frozenset[int]
    family: str
    bigram_seed: int
    priority: int

    def __post_init__(self) -> None:
        if not self.alphabet:
            raise ValidationError(f"language {self.id!r}: alphabet is empty")
        if not self.id:
            raise ValidationError("language id must be non-empty")

    @property
    def letters(self) -> tuple[int, ...]:
        """Alphabet in ascending codepoint order (the chain's state order)."""
        return tuple(sorted(self.alphabet))

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "family": self.family,
            "alphabet": [list(r) for r in codepoint_ranges(self.alphabet)],
            "bigram_seed": self.bigram_seed,
            "priority": self.priority,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "LanguageSpec":
        try:
            alphabet: set[int] = set()
            for lo, hi in data["alphabet"]:
                alphabet.update(range(int(lo), int(hi) + 1))
            return cls(
                id=str(data["id"]),
                alphabet=frozenset(alphabet),
                family=str(data.get("family", "")),
                bigram_seed=int(data["bigram_seed"]),
                priority=int(data.get("priority", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed language entry {data!r}: {exc}") from exc


def codepoint_ranges(codepoints: Iterable[int]) -> list[tuple[int, int]]:
    """Collapse codepoints into inclusive (lo, hi) ranges."""

    out: list[tuple[int, int]] = []
    for cp in sorted(set(codepoints)):
        if out and cp == out[-1][1] + 1:
            out[-1] = (out[-1][0], cp)
        else:
            out.append((cp, cp))
    return out


class CodepointPool:
    """Hands out disjoint codepoints in pool order."""

    def __init__(self, codepoints: Sequence[int] = EXTENDED_POOL) -> None:
        self._codepoints = tuple(codepoints)
        self._next = 0

    @property
    def remaining(self) -> int:
        return len(self._codepoints) - self._next

    def take(self, n: int) -> list[int]:
        if n > self.remaining:
            raise CorpusError(f"codepoint budget exhausted: need {n}, {self.remaining} left of {len(self._codepoints)}")
        out = list(self._codepoints[self._next : self._next + n])
        self._next += n
        return out


def shared_count(shared_alphabet_fraction: float, alphabet_size: int) -> int:
    return math.floor(Fraction(str(shared_alphabet_fraction)) * alphabet_size)


def synth_family(
    n_langs: int,
    shared_alphabet_fraction: float,
    alphabet_size: int,
    seed: int,
    *,
    family: str = "f0",
    pool: CodepointPool | None = None,
    first_priority: int = 1,
) -> list[LanguageSpec]:
    """Languages sharing exactly floor(fraction * size) codepoints, the rest unique."""

    if not 0 <= shared_alphabet_fraction <= 1:
        raise ValidationError(f"shared_alphabet_fraction must be in [0, 1], got {shared_alphabet_fraction}")
    if n_langs < 1 or alphabet_size < 1:
        raise ValidationError("n_langs and alphabet_size must be >= 1")
    if n_langs > len(string.ascii_lowercase):
        raise ValidationError(f"at most {len(string.ascii_lowercase)} languages per family")
    pool = pool if pool is not None else CodepointPool()
    n_shared = shared_count(shared_alphabet_fraction, alphabet_size)
    shared = pool.take(n_shared)
    specs = []
    for i in range(n_langs):
        unique = pool.take(alphabet_size - n_shared)
        specs.append(
            LanguageSpec(
                id=f"{family}{string.ascii_lowercase[i]}",
                alphabet=frozenset(shared + unique),
                family=family,
                bigram_seed=derive_seed(seed, family, i),
                priority=first_priority + i,
            )
        )
    return specs


def synth_families(
    n_families: int,
    langs_per_family: int,
    shared_alphabet_fraction: float,
    alphabet_size: int,
    seed: int,
    *,
    pool: CodepointPool | None = None,
) -> list[LanguageSpec]:
    """Several families with mutually disjoint alphabets; priorities run 1..N across families."""

    pool = pool if pool is not None else CodepointPool()
    specs: list[LanguageSpec] = []
    for f in range(n_families):
        specs.extend(
            synth_family(
                langs_per_family,
                shared_alphabet_fraction,
                alphabet_size,
                seed,
                family=f"f{f}",
                pool=pool,
                first_priority=len(specs) + 1,
            )
        )
    return specs


def planted_languages(n_langs: int, alphabet_size: int, seed: int) -> list[LanguageSpec]:
    """Disjoint single-byte alphabets for planted models (family ``p``)."""

    return synth_family(n_langs, 0.0, alphabet_size, seed, family="p", pool=CodepointPool(ASCII_POOL))


class LanguageRegistry:
    """Registered languages, iterated in id order."""

    def __init__(self, specs: Iterable[LanguageSpec]) -> None:
        by_id: dict[str, LanguageSpec] = {}
        for spec in specs:
            if spec.id in by_id:
                raise ValidationError(f"duplicate language id {spec.id!r}")
            by_id[spec.id] = spec
        if not by_id:
            raise ValidationError("registry has no languages")
        self._by_id = dict(sorted(by_id.items()))

    def __iter__(self) -> Iterator[LanguageSpec]:
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, lang: object) -> bool:
        return lang in self._by_id

    def __getitem__(self, lang: str) -> LanguageSpec:
        try:
            return self._by_id[lang]
        except KeyError:
            raise ValidationError(f"unknown language id {lang!r}") from None

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._by_id)

    def priority_order(self) -> list[str]:
        return [s.id for s in sorted(self._by_id.values(), key=lambda s: (s.priority, s.id))]

    def pivot(self) -> str:
        return self.priority_order()[0]

    def to_json(self) -> dict[str, Any]:
        return {"schema_version": REGISTRY_SCHEMA_VERSION, "languages": [s.to_json() for s in self]}


def save_registry(registry: LanguageRegistry, path: str | Path) -> Path:
    return write_text_artifact(path, json.dumps(registry.to_json(), sort_keys=True, indent=2) + "\n")


def load_registry(path: str | Path) -> LanguageRegistry:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = data["languages"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"cannot read language registry {path}: {exc}") from exc
    return LanguageRegistry(LanguageSpec.from_json(e) for e in entries)


__all__ = [
    "ASCII_POOL",
    "CodepointPool",
    "EXTENDED_POOL",
    "LanguageRegistry",
    "LanguageSpec",
    "codepoint_ranges",
    "load_registry",
    "planted_languages",
    "save_registry",
    "shared_count",
    "synth_families",
    "synth_family",
]
