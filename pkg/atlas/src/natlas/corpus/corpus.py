"""Per-language document collections: synthesis, directory I/O and byte budgets."""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CorpusError
from ..logging import jlog
from ..storage import write_artifact
from .chain import generate_corpus
from .languages import LanguageRegistry


@dataclass(frozen=True)
class Corpus:
    documents: dict[str, tuple[bytes, ...]]
    provenance: str
    skipped: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for lang, docs in self.documents.items():
            if any(len(d) == 0 for d in docs):
                raise CorpusError(f"language {lang!r}: empty document")

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(sorted(self.documents))

    def n_bytes(self, lang: str) -> int:
        return sum(len(d) for d in self.documents.get(lang, ()))

    def is_empty(self) -> bool:
        return not any(self.documents.values())

    def check_registered(self, registry: LanguageRegistry) -> None:
        for lang in self.documents:
            if lang not in registry:
                raise CorpusError(f"corpus language {lang!r} is not registered")

    def subset(self, keep: dict[str, list[int]]) -> "Corpus":
        """Corpus restricted to the given document indices per language."""
        docs = {lang: tuple(self.documents[lang][i] for i in idx) for lang, idx in keep.items()}
        return Corpus(documents=docs, provenance=self.provenance)


def synthesize_corpus(registry: LanguageRegistry, n_docs: int, doc_len: int, seed: int) -> Corpus:
    docs = {spec.id: tuple(d.encode("utf-8") for d in generate_corpus(spec, n_docs, doc_len, seed)) for spec in registry}
    return Corpus(documents=docs, provenance=f"synthetic:seed={seed}:n_docs={n_docs}:doc_len={doc_len}")


def _read_documents(path: Path) -> tuple[list[bytes], int]:
    """One document per non-empty line; lines that are not valid UTF-8 are skipped."""
    docs: list[bytes] = []
    skipped = 0
    for line in path.read_bytes().split(b"\n"):
        line = line.rstrip(b"\r")
        if not line.strip():
            continue
        try:
            line.decode("utf-8")
        except UnicodeDecodeError:
            skipped += 1
            continue
        docs.append(line)
    return docs, skipped


async def _read_all(paths: list[Path]) -> list[tuple[list[bytes], int]]:
    return list(await asyncio.gather(*(asyncio.to_thread(_read_documents, p) for p in paths)))


def load_corpus_dir(path: str | Path, registry: LanguageRegistry, *, max_bytes: int | None = None) -> Corpus:
    """Load ``<root>/<lang-id>/*.txt``; files are read concurrently, merged in sorted-path order."""

    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    lang_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    for d in lang_dirs:
        if d.name not in registry:
            raise CorpusError(f"unknown language id {d.name!r} in {root}")
    files = [(d.name, f) for d in lang_dirs for f in sorted(d.glob("*.txt"))]
    results = asyncio.run(_read_all([f for _, f in files]))

    documents: dict[str, list[bytes]] = {d.name: [] for d in lang_dirs}
    skipped: dict[str, int] = {d.name: 0 for d in lang_dirs}
    used: dict[str, int] = {d.name: 0 for d in lang_dirs}
    budget_hit: set[str] = set()
    for (lang, _), (docs, n_skipped) in zip(files, results):
        skipped[lang] += n_skipped
        for doc in docs:
            if lang in budget_hit:
                break
            if max_bytes is not None and used[lang] + len(doc) > max_bytes:
                budget_hit.add(lang)
                break
            documents[lang].append(doc)
            used[lang] += len(doc)
    for lang, n in skipped.items():
        if n:
            jlog("warning", event="corpus_invalid_utf8", language=lang, skipped=n)
    jlog(
        "info",
        event="corpus_loaded",
        path=str(root),
        languages=sorted(documents),
        documents={k: len(v) for k, v in documents.items()},
        truncated=sorted(budget_hit),
    )
    return Corpus(
        documents={k: tuple(v) for k, v in documents.items()},
        provenance=f"dir:{root}:max_bytes={max_bytes}",
        skipped=skipped,
    )


def write_corpus_dir(corpus: Corpus, path: str | Path, *, docs_per_file: int = 1000) -> Path:
    root = Path(path)
    for lang in corpus.languages:
        docs = corpus.documents[lang]
        for n, start in enumerate(range(0, len(docs), docs_per_file)):
            payload = b"\n".join(docs[start : start + docs_per_file]) + b"\n"
            write_artifact(root / lang / f"part-{n:05d}.txt", payload)
    return root


__all__ = ["Corpus", "load_corpus_dir", "synthesize_corpus", "write_corpus_dir"]
