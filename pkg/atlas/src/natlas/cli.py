"""Command-line entry point binding every natlas module.

Every subcommand shares ``--seed``, ``--out-dir``, ``--config``,
``--concurrency`` and ``--log-level``. ``--config`` names a plain-text file
of ``key=value`` lines whose keys are the subcommand's option names; flags on
the command line win over the file.
"""

from __future__ import annotations

import argparse
import re
import sys
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, ClassVar

import torch

from .corpus import (
    Corpus,
    LanguageRegistry,
    classify,
    load_corpus_dir,
    load_registry,
    planted_languages,
    save_registry,
    synth_families,
    synthesize_corpus,
    write_corpus_dir,
)
from .corpus.tokenizer import VOCAB_SIZE, detokenize, tokenize
from .errors import ConfigError, ValidationError
from .harness.emit import emit_csv, emit_heatmap_svg, emit_json, emit_stacked_bar_svg
from .harness.evaluate import EvalTask, Metric, load_tasks, run_eval, run_transfer, write_eval_result, write_transfer_report
from .harness.fallback import run_fallback, write_fallback_report
from .harness.forcing import Family, ForcingConfig, Strategy, run_forcing_sweep, sweep_table, write_forcing_report
from .harness.prompts import FALLBACK_PROMPTS, FORCING_QUESTIONS, fallback_prompts, forcing_questions, language_questions
from .lape import (
    AccumulateConfig,
    ActivationStats,
    FilterConfig,
    FilterPopulation,
    NeuronSet,
    accumulate,
    compute_lape,
    family_overlap,
    layer_distribution,
    load_neuron_sets,
    load_stats,
    neuron_count_table,
    overlap,
    save_neuron_sets,
    save_stats,
    select,
)
from .lens import LensMode, profile_suite, write_suite
from .logging import configure_logging, jlog, run_context, set_global_context, stage
from .metadata import build_report_metadata
from .model import (
    Checkpoint,
    DirectiveMode,
    GenerationSettings,
    ModelConfig,
    TinyDecoder,
    TrainHyper,
    default_plant,
    generate,
    load_checkpoint,
    plant_model,
    planted_config,
    save_checkpoint,
    save_ledger,
    train_tiny,
)
from .model.plant import G_HI, NOISE_SCALE, PLANT_D_FF, PLANT_PER_LANG
from .steer import BoostDenominator, DiffMeanLayers, InterventionPlan, ReplaceStatistic, load_plan
from .versioning import get_toolkit_version

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DEFAULT_OUT_DIR = "out"
DEFAULT_K = (1.0, 2.0, 3.0, 4.0, 5.0)
LENS_PROMPTS = 10
SYNTH_DOCS = 200
SYNTH_DOC_LEN = 256
_LIST_SPLIT = re.compile(r"[\s,]+")


# ============================
# Args
# ============================


@dataclass(frozen=True)
class CommonArgs:
    command: str
    seed: int
    out_dir: str
    config: str | None
    concurrency: int
    log_level: str

    REQUIRED: ClassVar[tuple[str, ...]] = ()


@dataclass(frozen=True)
class SynthArgs(CommonArgs):
    kind: str
    families: int
    langs_per_family: int
    shared_fraction: float
    n_langs: int
    alphabet_size: int | None
    docs: int
    doc_len: int


@dataclass(frozen=True)
class PlantArgs(CommonArgs):
    registry: str | None
    n_langs: int
    alphabet_size: int
    n_layers: int
    d_model: int
    d_ff: int
    n_heads: int
    max_seq_len: int
    per_lang: int
    plant_layers: tuple[int, ...]
    g_hi: float
    noise: float


@dataclass(frozen=True)
class TrainArgs(CommonArgs):
    registry: str
    corpus: str
    n_layers: int
    d_model: int
    d_ff: int
    n_heads: int
    max_seq_len: int
    steps: int
    lr: float
    batch: int
    seq_len: int | None
    max_bytes: int | None

    REQUIRED: ClassVar[tuple[str, ...]] = ("registry", "corpus")


@dataclass(frozen=True)
class IdentifyArgs(CommonArgs):
    model: str
    registry: str
    corpus: str | None
    stats: str | None
    k: tuple[float, ...]
    context_len: int
    stride: int
    sketch_capacity: int
    filter_percentile: float
    threshold_percentile: float
    filter_population: str
    max_bytes: int | None

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "registry")


@dataclass(frozen=True)
class OverlapArgs(CommonArgs):
    neurons: str
    registry: str | None

    REQUIRED: ClassVar[tuple[str, ...]] = ("neurons",)


@dataclass(frozen=True)
class LensArgs(CommonArgs):
    model: str
    registry: str
    prompts: int
    mode: str
    pivot: str | None
    top_n: int

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "registry")


@dataclass(frozen=True)
class SelectionArgs(CommonArgs):
    """Options shared by commands that select neuron sets from a stats file."""

    model: str
    registry: str
    stats: str
    filter_percentile: float
    threshold_percentile: float
    filter_population: str
    max_tokens: int
    repetition_penalty: float

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "registry", "stats")


@dataclass(frozen=True)
class ForceArgs(SelectionArgs):
    k: tuple[float, ...]
    families: tuple[str, ...]
    strategies: tuple[str, ...]
    deact_values: tuple[float, ...]
    deact_mode: str
    boost_denominator: str
    replace_statistic: str
    diffmean_scale: float
    diffmean_layers: str
    questions: int


@dataclass(frozen=True)
class FallbackArgs(SelectionArgs):
    k: float
    order: tuple[str, ...] | None
    prompts: int
    deact_value: float
    deact_mode: str


@dataclass(frozen=True)
class EvalArgs(CommonArgs):
    model: str
    tasks: str
    plan: str | None
    metric: str
    task_id: str | None
    repetition_penalty: float

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "tasks")


@dataclass(frozen=True)
class TransferArgs(SelectionArgs):
    tasks_dir: str
    k: float
    metric: str

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "registry", "stats", "tasks_dir")


@dataclass(frozen=True)
class SteerGenerateArgs(CommonArgs):
    model: str
    prompt: str
    plan: str | None
    registry: str | None
    max_tokens: int
    repetition_penalty: float

    REQUIRED: ClassVar[tuple[str, ...]] = ("model", "prompt")


# ============================
# Parser
# ============================


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=DEFAULT_OUT_DIR)
    p.add_argument("--config", help="plain-text key=value file with option defaults")
    p.add_argument("--concurrency", type=int, default=1, help="parallel experiment cells / accumulation workers")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def _model_shape(p: argparse.ArgumentParser, *, d_ff: int = 256, max_seq_len: int = 256) -> None:
    p.add_argument("--n-layers", type=int, default=4)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--d-ff", type=int, default=d_ff)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--max-seq-len", type=int, default=max_seq_len)


def _filters(p: argparse.ArgumentParser) -> None:
    p.add_argument("--filter-percentile", type=float, default=95.0)
    p.add_argument("--threshold-percentile", type=float, default=95.0)
    p.add_argument("--filter-population", default=FilterPopulation.PROB.value, choices=[m.value for m in FilterPopulation])


def _selection(p: argparse.ArgumentParser, *, max_tokens: int = 256) -> None:
    p.add_argument("--model")
    p.add_argument("--registry")
    p.add_argument("--stats")
    _filters(p)
    p.add_argument("--max-tokens", type=int, default=max_tokens)
    p.add_argument("--repetition-penalty", type=float, default=1.1)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="natlas", description="Language-specific neuron identification and steering")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        subs[name] = sub.add_parser(name, parents=[common], help=help_text)
        return subs[name]

    p = add("synth", "write a synthetic language registry and corpus")
    p.add_argument("--kind", default="families", choices=["families", "planted"])
    p.add_argument("--families", type=int, default=2)
    p.add_argument("--langs-per-family", type=int, default=3)
    p.add_argument("--shared-fraction", type=float, default=0.6)
    p.add_argument("--n-langs", type=int, default=4, help="planted kind only")
    p.add_argument("--alphabet-size", type=int, help="default 12 for families, 6 for planted")
    p.add_argument("--docs", type=int, default=SYNTH_DOCS)
    p.add_argument("--doc-len", type=int, default=SYNTH_DOC_LEN)

    p = add("plant", "build a planted model with known language neurons")
    p.add_argument("--registry", help="planted-compatible registry; generated when omitted")
    p.add_argument("--n-langs", type=int, default=4)
    p.add_argument("--alphabet-size", type=int, default=6)
    _model_shape(p, d_ff=PLANT_D_FF, max_seq_len=512)
    p.add_argument("--per-lang", type=int, default=PLANT_PER_LANG)
    p.add_argument("--plant-layers", type=int, nargs="+", help="layers to host planted neurons; default the upper half")
    p.add_argument("--g-hi", type=float, default=G_HI)
    p.add_argument("--noise", type=float, default=NOISE_SCALE)

    p = add("train", "train a tiny model on a corpus directory")
    p.add_argument("--registry")
    p.add_argument("--corpus")
    _model_shape(p)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--max-bytes", type=int)

    p = add("identify", "accumulate activation statistics and select language neurons")
    p.add_argument("--model")
    p.add_argument("--registry")
    p.add_argument("--corpus", help="corpus directory; a synthetic corpus is generated when omitted")
    p.add_argument("--stats", help="reuse a stats file instead of accumulating")
    p.add_argument("--k", type=float, nargs="+", default=list(DEFAULT_K))
    p.add_argument("--context-len", type=int, default=128)
    p.add_argument("--stride", type=int, default=64)
    p.add_argument("--sketch-capacity", type=int, default=512)
    _filters(p)
    p.add_argument("--max-bytes", type=int)

    p = add("overlap", "overlap matrix between language neuron sets")
    p.add_argument("--neurons")
    p.add_argument("--registry", help="adds within/across family means")

    p = add("lens", "per-layer language profile with the logit lens")
    p.add_argument("--model")
    p.add_argument("--registry")
    p.add_argument("--prompts", type=int, default=LENS_PROMPTS, help="prompts per language")
    p.add_argument("--mode", default=LensMode.MASS.value, choices=[m.value for m in LensMode])
    p.add_argument("--pivot")
    p.add_argument("--top-n", type=int, default=5)

    p = add("force", "language forcing over every (source, target) pair")
    _selection(p)
    p.add_argument("--k", type=float, nargs="+", default=[1.0])
    p.add_argument("--families", nargs="+", default=[Family.ADDITIVE.value], choices=[m.value for m in Family])
    p.add_argument("--strategies", nargs="+", default=[Strategy.DEACT_ACT.value], choices=[m.value for m in Strategy])
    p.add_argument("--deact-values", type=float, nargs="+", default=[0.0])
    p.add_argument("--deact-mode", default=DirectiveMode.MULTIPLY.value, choices=[DirectiveMode.MULTIPLY.value, DirectiveMode.SET.value])
    p.add_argument("--boost-denominator", default=BoostDenominator.ALL.value, choices=[m.value for m in BoostDenominator])
    p.add_argument("--replace-statistic", default=ReplaceStatistic.MEAN.value, choices=[m.value for m in ReplaceStatistic])
    p.add_argument("--diffmean-scale", type=float, default=1.0)
    p.add_argument("--diffmean-layers", default=DiffMeanLayers.ALL.value, choices=[m.value for m in DiffMeanLayers])
    p.add_argument("--questions", type=int, default=FORCING_QUESTIONS)

    p = add("fallback", "progressive deactivation cascade")
    _selection(p)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--order", nargs="+", help="deactivation order; default all but the last language by priority")
    p.add_argument("--prompts", type=int, default=FALLBACK_PROMPTS)
    p.add_argument("--deact-value", type=float, default=-1.0)
    p.add_argument("--deact-mode", default=DirectiveMode.SET.value, choices=[DirectiveMode.MULTIPLY.value, DirectiveMode.SET.value])

    p = add("eval", "prompted evaluation over a JSON-lines task file")
    p.add_argument("--model")
    p.add_argument("--tasks")
    p.add_argument("--plan")
    p.add_argument("--metric", default=Metric.EXACT_MATCH.value, choices=[m.value for m in Metric])
    p.add_argument("--task-id")
    p.add_argument("--repetition-penalty", type=float, default=1.1)

    p = add("transfer", "score change per task language when activating each language")
    _selection(p, max_tokens=32)
    p.add_argument("--tasks-dir", help="directory of <language>.jsonl task files")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--metric", default=Metric.CHAR_F1.value, choices=[m.value for m in Metric])

    p = add("steer-generate", "generate one continuation under an intervention plan")
    p.add_argument("--model")
    p.add_argument("--prompt")
    p.add_argument("--plan")
    p.add_argument("--registry", help="classify the output when given")
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--repetition-penalty", type=float, default=1.1)

    return parser, subs


# ============================
# Config files
# ============================


def _convert(action: argparse.Action, raw: str) -> Any:
    if action.nargs == 0:
        lowered = raw.strip().lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{action.dest}: expected a boolean, got {raw!r}")
        return lowered in ("true", "1", "yes")
    convert: Callable[[str], Any] = action.type if callable(action.type) else str
    items = [s for s in _LIST_SPLIT.split(raw.strip()) if s] if action.nargs in ("+", "*") else [raw.strip()]
    try:
        values = [convert(s) for s in items]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{action.dest}: cannot parse {raw!r}: {exc}") from exc
    if action.choices is not None:
        bad = [v for v in values if v not in action.choices]
        if bad:
            raise ConfigError(f"{action.dest}: {bad[0]!r} is not one of {sorted(action.choices)}")
    return values if action.nargs in ("+", "*") else values[0]


def read_config(path: str | Path, parser: argparse.ArgumentParser) -> dict[str, Any]:
    """Parse ``key=value`` lines into parser defaults; ``#`` starts a comment."""

    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    actions = {a.dest: a for a in parser._actions if a.option_strings and a.dest not in ("help", "config")}
    values: dict[str, Any] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        dest = key.strip().lstrip("-").replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        values[dest] = _convert(actions[dest], raw)
    return values


def _build_args(cls: type[CommonArgs], ns: argparse.Namespace) -> CommonArgs:
    missing = [name for name in cls.REQUIRED if getattr(ns, name, None) is None]
    if missing:
        raise ValidationError(f"{ns.command}: --{missing[0].replace('_', '-')} is required")
    values = {}
    for f in fields(cls):
        value = getattr(ns, f.name)
        values[f.name] = tuple(value) if isinstance(value, list) else value
    return cls(**values)


def parse_args(argv: Sequence[str] | None = None) -> CommonArgs:
    parser, subs = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        subs[ns.command].set_defaults(**read_config(ns.config, subs[ns.command]))
        ns = parser.parse_args(argv)
    if ns.concurrency < 1:
        raise ValidationError(f"--concurrency must be >= 1, got {ns.concurrency}")
    return _build_args(COMMANDS[ns.command][0], ns)


# ============================
# Shared helpers
# ============================


def _metadata(args: CommonArgs, *, ckpt: Checkpoint | None = None, stats: ActivationStats | None = None) -> dict[str, Any]:
    params = {k: v for k, v in asdict(args).items() if k not in ("command", "seed", "out_dir", "config", "concurrency", "log_level")}
    return dict(
        build_report_metadata(
            kind=args.command,
            toolkit_version=get_toolkit_version(args.command),
            seed=args.seed,
            model_digest=ckpt.digest() if ckpt is not None else None,
            stats_digest=stats.digest() if stats is not None else None,
            params={k: list(v) if isinstance(v, tuple) else v for k, v in params.items()},
        )
    )


def _filter_config(args: SelectionArgs | IdentifyArgs) -> FilterConfig:
    filters = FilterConfig(args.filter_percentile, args.threshold_percentile, FilterPopulation(args.filter_population))
    filters.validate()
    return filters


def _select_sets(stats: ActivationStats, k_percent: float, filters: FilterConfig) -> dict[str, NeuronSet]:
    return select(compute_lape(stats, filters), k_percent).sets


def _settings(max_tokens: int, repetition_penalty: float, seed: int) -> GenerationSettings:
    settings = GenerationSettings(max_tokens=max_tokens, repetition_penalty=repetition_penalty, seed=seed)
    settings.validate()
    return settings


def _load_for_selection(args: SelectionArgs) -> tuple[Checkpoint, TinyDecoder, LanguageRegistry, ActivationStats]:
    ckpt = load_checkpoint(args.model)
    registry = load_registry(args.registry)
    stats = load_stats(args.stats)
    if stats.model_digest != ckpt.digest():
        jlog("warning", event="stats_model_mismatch", stats_model=stats.model_digest, model=ckpt.digest())
    return ckpt, TinyDecoder.from_checkpoint(ckpt), registry, stats


def _heatmap_counts(matrix: Any, labels: Sequence[str], path: Path, title: str, fmt: str) -> Path:
    return emit_heatmap_svg(matrix, list(labels), list(labels), path, title=title, fmt=fmt)


# ============================
# Commands
# ============================


def cmd_synth(args: SynthArgs) -> None:
    out = Path(args.out_dir)
    if args.kind == "planted":
        specs = planted_languages(args.n_langs, args.alphabet_size or 6, args.seed)
    else:
        specs = synth_families(args.families, args.langs_per_family, args.shared_fraction, args.alphabet_size or 12, args.seed)
    registry = LanguageRegistry(specs)
    corpus = synthesize_corpus(registry, args.docs, args.doc_len, args.seed)
    save_registry(registry, out / "registry.json")
    write_corpus_dir(corpus, out / "corpus")
    jlog("info", event="synth_done", languages=list(registry.ids), docs=args.docs, doc_len=args.doc_len)


def cmd_plant(args: PlantArgs) -> None:
    out = Path(args.out_dir)
    if args.registry:
        registry = load_registry(args.registry)
    else:
        registry = LanguageRegistry(planted_languages(args.n_langs, args.alphabet_size, args.seed))
    config = planted_config(
        n_layers=args.n_layers, d_model=args.d_model, d_ff=args.d_ff, n_heads=args.n_heads, max_seq_len=args.max_seq_len
    )
    layers = args.plant_layers or tuple(range(args.n_layers // 2, args.n_layers))
    plant = default_plant(list(registry), config, args.per_lang, layers, args.seed)
    ckpt, ledger = plant_model(list(registry), plant, config, seed=args.seed, g_hi=args.g_hi, noise=args.noise)
    save_checkpoint(ckpt, out / "model.bin")
    save_ledger(ledger, out / "ledger.json")
    save_registry(registry, out / "registry.json")
    jlog("info", event="plant_done", model_digest=ckpt.digest(), planted=len(ledger.all_neurons()))


def cmd_train(args: TrainArgs) -> None:
    registry = load_registry(args.registry)
    corpus = load_corpus_dir(args.corpus, registry, max_bytes=args.max_bytes)
    config = ModelConfig(
        n_layers=args.n_layers,
        d_model=args.d_model,
        d_ff=args.d_ff,
        n_heads=args.n_heads,
        vocab_size=VOCAB_SIZE,
        max_seq_len=args.max_seq_len,
    )
    hyper = TrainHyper(steps=args.steps, lr=args.lr, batch=args.batch, seed=args.seed, seq_len=args.seq_len)
    with stage("train", steps=args.steps):
        ckpt = train_tiny(corpus, config, hyper)
    save_checkpoint(ckpt, Path(args.out_dir) / "model.bin")


def _identify_corpus(args: IdentifyArgs, registry: LanguageRegistry) -> Corpus:
    if args.corpus:
        return load_corpus_dir(args.corpus, registry, max_bytes=args.max_bytes)
    return synthesize_corpus(registry, SYNTH_DOCS, SYNTH_DOC_LEN, args.seed)


def cmd_identify(args: IdentifyArgs) -> None:
    out = Path(args.out_dir)
    ckpt = load_checkpoint(args.model)
    registry = load_registry(args.registry)
    if args.stats:
        stats = load_stats(args.stats)
    else:
        with stage("accumulate"):
            config = AccumulateConfig(args.context_len, args.stride, args.sketch_capacity, args.concurrency)
            stats = accumulate(ckpt, _identify_corpus(args, registry), config, registry=registry)
            save_stats(stats, out / "stats.bin")
    filters = _filter_config(args)
    with stage("lape"):
        table = compute_lape(stats, filters)
        md = _metadata(args, ckpt=ckpt, stats=stats)
        emit_json({**md, **table.to_json()}, out / "lape.json")

    selections: dict[float, dict[str, NeuronSet]] = {}
    multiplicity: dict[float, dict[int, int]] = {}
    with stage("select", k=sorted(set(args.k))):
        for k in sorted(set(args.k)):
            selection = select(table, k)
            selections[k] = selection.sets
            multiplicity[k] = selection.multiplicity
            save_neuron_sets(selection.sets.values(), out / f"neurons_k{k:g}.json")
            dist = layer_distribution(selection.sets, stats.n_layers)
            layer_header = ("language", *(str(i) for i in range(stats.n_layers)))
            emit_csv(layer_header, [[lang, *c] for lang, c in dist.items()], out / f"layers_k{k:g}.csv")
            emit_stacked_bar_svg(dist, out / f"layers_k{k:g}.svg", title=f"language neurons per layer (top {k:g}%)")

    header, rows = neuron_count_table(selections)
    emit_csv(header, rows, out / "neuron_counts.csv")
    n_langs = len(stats.languages)
    emit_csv(
        ("languages_per_neuron", *(f"top-{k:g}%" for k in selections)),
        [[m, *(multiplicity[k][m] for k in selections)] for m in range(n_langs + 1)],
        out / "multiplicity.csv",
    )
    jlog("info", event="identify_done", counts={f"{k:g}": {lang: len(s) for lang, s in sets.items()} for k, sets in selections.items()})


def cmd_overlap(args: OverlapArgs) -> None:
    out = Path(args.out_dir)
    sets = load_neuron_sets(args.neurons)
    matrix = overlap(sets)
    langs = list(matrix.languages)
    report: dict[str, Any] = {
        **_metadata(args),
        "languages": langs,
        "counts": matrix.counts.tolist(),
        "percentages": matrix.percentages().tolist(),
    }
    if args.registry:
        registry = load_registry(args.registry)
        within, across = family_overlap(matrix, {lang: registry[lang].family for lang in langs})
        report["within_family_mean"] = within
        report["across_family_mean"] = across
    emit_json(report, out / "overlap.json")
    emit_csv(("language", *langs), matrix.rows(), out / "overlap.csv")
    emit_csv(("language", *langs), [[lang, *matrix.percentages()[i]] for i, lang in enumerate(langs)], out / "overlap_pct.csv")
    _heatmap_counts(matrix.counts, langs, out / "overlap.svg", "shared language neurons", "{:.0f}")
    _heatmap_counts(matrix.percentages(), langs, out / "overlap_pct.svg", "shared neurons (% of row set)", "{:.1f}")


def cmd_lens(args: LensArgs) -> None:
    ckpt = load_checkpoint(args.model)
    registry = load_registry(args.registry)
    prompts = {spec.id: language_questions(spec, args.prompts, args.seed) for spec in registry}
    suite = profile_suite(
        TinyDecoder.from_checkpoint(ckpt),
        prompts,
        registry,
        pivot=args.pivot,
        mode=LensMode(args.mode),
        top_n=args.top_n,
        concurrency=args.concurrency,
    )
    write_suite(suite, args.out_dir, _metadata(args, ckpt=ckpt))


def cmd_force(args: ForceArgs) -> None:
    out = Path(args.out_dir)
    ckpt, model, registry, stats = _load_for_selection(args)
    filters = _filter_config(args)
    with stage("select", k=sorted(set(args.k))):
        table = compute_lape(stats, filters)
        sets_by_k = {k: select(table, k).sets for k in sorted(set(args.k))}
    base = ForcingConfig(
        k_percent=min(sets_by_k),
        deact_mode=DirectiveMode(args.deact_mode),
        boost_denominator=BoostDenominator(args.boost_denominator),
        replace_statistic=ReplaceStatistic(args.replace_statistic),
        diffmean_scale=args.diffmean_scale,
        diffmean_layers=DiffMeanLayers(args.diffmean_layers),
        settings=_settings(args.max_tokens, args.repetition_penalty, args.seed),
        concurrency=args.concurrency,
    )
    with stage("forcing"):
        reports = run_forcing_sweep(
            model,
            registry,
            sets_by_k,
            stats,
            forcing_questions(registry, args.seed, args.questions),
            base,
            families=[Family(f) for f in args.families],
            strategies=[Strategy(s) for s in args.strategies],
            deact_values=list(args.deact_values),
        )
    md = _metadata(args, ckpt=ckpt, stats=stats)
    for report in reports:
        write_forcing_report(report, out, md)
    header, rows = sweep_table(reports)
    emit_csv(header, rows, out / "forcing_summary.csv")


def cmd_fallback(args: FallbackArgs) -> None:
    ckpt, model, registry, stats = _load_for_selection(args)
    with stage("select", k=args.k):
        sets = _select_sets(stats, args.k, _filter_config(args))
    order = args.order if args.order is not None else tuple(registry.priority_order()[:-1])
    with stage("cascade"):
        report = run_fallback(
            model,
            registry,
            sets,
            order,
            fallback_prompts(registry, args.seed, args.prompts),
            deact_value=args.deact_value,
            deact_mode=DirectiveMode(args.deact_mode),
            settings=_settings(args.max_tokens, args.repetition_penalty, args.seed),
            concurrency=args.concurrency,
        )
    write_fallback_report(report, args.out_dir, _metadata(args, ckpt=ckpt, stats=stats))


def cmd_eval(args: EvalArgs) -> None:
    ckpt = load_checkpoint(args.model)
    plan = load_plan(args.plan) if args.plan else InterventionPlan.empty()
    result = run_eval(
        TinyDecoder.from_checkpoint(ckpt),
        load_tasks(args.tasks),
        task_id=args.task_id or Path(args.tasks).stem,
        plan=plan,
        metric=Metric(args.metric),
        settings=_settings(1, args.repetition_penalty, args.seed),
        concurrency=args.concurrency,
    )
    write_eval_result(result, args.out_dir, _metadata(args, ckpt=ckpt))


def _load_task_dir(path: str | Path, registry: LanguageRegistry) -> dict[str, list[EvalTask]]:
    files = sorted(Path(path).glob("*.jsonl"))
    tasks = {f.stem: load_tasks(f) for f in files if f.stem in registry}
    if not tasks:
        raise ValidationError(f"no <language>.jsonl task files for registered languages in {path}")
    return tasks


def cmd_transfer(args: TransferArgs) -> None:
    ckpt, model, registry, stats = _load_for_selection(args)
    sets = _select_sets(stats, args.k, _filter_config(args))
    report = run_transfer(
        model,
        _load_task_dir(args.tasks_dir, registry),
        sets,
        stats,
        metric=Metric(args.metric),
        settings=_settings(args.max_tokens, args.repetition_penalty, args.seed),
        concurrency=args.concurrency,
    )
    write_transfer_report(report, args.out_dir, _metadata(args, ckpt=ckpt, stats=stats))


def cmd_steer_generate(args: SteerGenerateArgs) -> None:
    ckpt = load_checkpoint(args.model)
    plan = load_plan(args.plan) if args.plan else InterventionPlan.empty()
    settings = _settings(args.max_tokens, args.repetition_penalty, args.seed)
    ids = generate(TinyDecoder.from_checkpoint(ckpt), tokenize(args.prompt), plan.directives, settings)
    text = detokenize(ids)
    report: dict[str, Any] = {**_metadata(args, ckpt=ckpt), "recipe": plan.recipe, "output": text, "tokens": ids}
    if args.registry:
        dist = classify(text, load_registry(args.registry))
        report["language"] = dist.top1()
        report["distribution"] = dist.as_dict()
    emit_json(report, Path(args.out_dir) / "steer_generate.json")
    sys.stdout.write(text + "\n")


COMMANDS: dict[str, tuple[type[CommonArgs], Callable[[Any], None]]] = {
    "synth": (SynthArgs, cmd_synth),
    "plant": (PlantArgs, cmd_plant),
    "train": (TrainArgs, cmd_train),
    "identify": (IdentifyArgs, cmd_identify),
    "overlap": (OverlapArgs, cmd_overlap),
    "lens": (LensArgs, cmd_lens),
    "force": (ForceArgs, cmd_force),
    "fallback": (FallbackArgs, cmd_fallback),
    "eval": (EvalArgs, cmd_eval),
    "transfer": (TransferArgs, cmd_transfer),
    "steer-generate": (SteerGenerateArgs, cmd_steer_generate),
}


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    try:
        args = parse_args(argv)
    except ValidationError as exc:
        jlog("error", event="command_failed", stage="parse", error=str(exc))
        return EXIT_VALIDATION
    configure_logging(args.log_level)
    set_global_context(app="natlas")
    torch.set_num_threads(1)
    with run_context(args.command, args.seed, args.out_dir, toolkit_version=get_toolkit_version(args.command)):
        jlog("info", event="command_start", seed=args.seed, out_dir=args.out_dir)
        try:
            COMMANDS[args.command][1](args)
        except ValidationError as exc:
            jlog("error", event="command_failed", error_type=type(exc).__name__, error=str(exc))
            return EXIT_VALIDATION
        except Exception as exc:
            jlog("error", event="command_failed", error_type=type(exc).__name__, error=repr(exc))
            return EXIT_RUNTIME
        jlog("info", event="command_done")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
