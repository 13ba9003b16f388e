import json

import pytest
from natlas.cli import EXIT_OK, EXIT_VALIDATION, IdentifyArgs, build_parser, main, parse_args, read_config
from natlas.errors import ConfigError
from natlas.lape import load_neuron_sets
from natlas.model import load_checkpoint, load_ledger


def _identify_parser():
    _, subs = build_parser()
    return subs["identify"]


def test_read_config_parses_typed_values(tmp_path):
    path = tmp_path / "identify.conf"
    path.write_text("# shared settings\nk = 1, 2\nfilter-population = value  # per-neuron means\n\ncontext_len=32\n")
    assert read_config(path, _identify_parser()) == {"k": [1.0, 2.0], "filter_population": "value", "context_len": 32}


@pytest.mark.parametrize(
    "line",
    ["bogus = 1", "filter_population = sideways", "context_len = many", "no separator here"],
)
def test_read_config_rejects_bad_lines(tmp_path, line):
    path = tmp_path / "bad.conf"
    path.write_text(line + "\n")
    with pytest.raises(ConfigError):
        read_config(path, _identify_parser())


def test_command_line_flags_override_the_config_file(tmp_path):
    path = tmp_path / "identify.conf"
    path.write_text("stride = 8\ncontext_len = 32\nk = 1 2\n")
    args = parse_args(["identify", "--model", "m.bin", "--registry", "r.json", "--config", str(path), "--stride", "16"])
    assert isinstance(args, IdentifyArgs)
    assert (args.context_len, args.stride, args.k) == (32, 16, (1.0, 2.0))
    assert args.filter_percentile == 95.0


def test_missing_required_option_exits_with_validation_code():
    assert main(["identify", "--registry", "r.json"]) == EXIT_VALIDATION
    assert main(["lens", "--model", "m.bin", "--registry", "r.json", "--concurrency", "0"]) == EXIT_VALIDATION


def test_unreadable_model_is_a_validation_failure(tmp_path):
    (tmp_path / "model.bin").write_bytes(b"not a checkpoint")
    argv = ["steer-generate", "--model", str(tmp_path / "model.bin"), "--prompt", "abc", "--out-dir", str(tmp_path)]
    assert main(argv) == EXIT_VALIDATION


def test_synth_plant_identify_recovers_the_ledger(tmp_path):
    data, model, found = tmp_path / "data", tmp_path / "model", tmp_path / "found"
    assert main(["synth", "--kind", "planted", "--docs", "4", "--doc-len", "64", "--out-dir", str(data)]) == EXIT_OK
    assert main(["plant", "--registry", str(data / "registry.json"), "--out-dir", str(model)]) == EXIT_OK
    argv = [
        "identify",
        "--model",
        str(model / "model.bin"),
        "--registry",
        str(model / "registry.json"),
        "--corpus",
        str(data / "corpus"),
        "--k",
        "1",
        "--context-len",
        "64",
        "--stride",
        "32",
        "--concurrency",
        "2",
        "--out-dir",
        str(found),
    ]
    assert main(argv) == EXIT_OK
    sets = load_neuron_sets(found / "neurons_k1.json")
    ledger = load_ledger(model / "ledger.json")
    assert {lang: set(s.neurons) for lang, s in sets.items()} == {lang: set(ns) for lang, ns in ledger.neurons.items()}
    for name in ("stats.bin", "lape.json", "layers_k1.csv", "layers_k1.svg", "neuron_counts.csv", "multiplicity.csv"):
        assert (found / name).exists()
    assert json.loads((found / "lape.json").read_text())["kind"] == "identify"

    assert main(["overlap", "--neurons", str(found / "neurons_k1.json"), "--out-dir", str(found)]) == EXIT_OK
    counts = json.loads((found / "overlap.json").read_text())["counts"]
    assert counts == [[8, 0, 0, 0], [0, 8, 0, 0], [0, 0, 8, 0], [0, 0, 0, 8]]


# 2 families x 3 languages sharing 60% of their alphabet within a family.
TRAINED_STEPS = "1500"
TRAINED_K = "5"


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trained_model_neurons_follow_families_and_sit_late(tmp_path, seed):
    data, out = tmp_path / "data", tmp_path / "out"
    common = ["--seed", str(seed)]
    synth = ["synth", *common, "--families", "2", "--langs-per-family", "3", "--shared-fraction", "0.6"]
    assert main([*synth, "--out-dir", str(data)]) == EXIT_OK
    registry, corpus = str(data / "registry.json"), str(data / "corpus")
    assert main(["train", *common, "--registry", registry, "--corpus", corpus, "--steps", TRAINED_STEPS, "--out-dir", str(out)]) == EXIT_OK
    model = str(out / "model.bin")
    identify = ["identify", *common, "--model", model, "--registry", registry, "--corpus", corpus, "--k", TRAINED_K]
    assert main([*identify, "--out-dir", str(out)]) == EXIT_OK
    neurons = out / f"neurons_k{TRAINED_K}.json"
    assert main(["overlap", "--neurons", str(neurons), "--registry", registry, "--out-dir", str(out)]) == EXIT_OK

    report = json.loads((out / "overlap.json").read_text())
    assert report["within_family_mean"] > report["across_family_mean"]
    kept = {n for s in load_neuron_sets(neurons).values() for n in s.neurons}
    n_layers = load_checkpoint(model).config.n_layers
    late = [layer for layer, _ in kept if layer >= n_layers // 2]
    assert kept
    assert len(late) / len(kept) >= 0.5

    assert main(["lens", "--model", model, "--registry", registry, "--prompts", "2", "--out-dir", str(out)]) == EXIT_OK
    for name in ("lape.json", "neuron_counts.csv", "lens_profile.json"):
        assert (out / name).exists()



def _pipeline(root):
    data, model, out = root / "data", root / "model", root / "out"
    registry, stats = str(model / "registry.json"), str(out / "stats.bin")
    selection = ["--model", str(model / "model.bin"), "--registry", registry, "--stats", stats, "--max-tokens", "4"]
    tasks = root / "tasks"
    tasks.mkdir(exist_ok=True)
    for lang, prompt in (("pa", "Q: abc? A:"), ("pb", "Q: ghi? A:")):
        (tasks / f"{lang}.jsonl").write_text(json.dumps({"prompt": prompt, "reference": "fedc", "max_tokens": 4}) + "\n")
    runs = [
        ["synth", "--kind", "planted", "--docs", "4", "--doc-len", "64", "--out-dir", str(data)],
        ["plant", "--registry", str(data / "registry.json"), "--out-dir", str(model)],
        ["identify", "--model", str(model / "model.bin"), "--registry", registry, "--corpus", str(data / "corpus"), "--k", "1", "2"],
        ["overlap", "--neurons", str(out / "neurons_k1.json"), "--registry", registry],
        ["lens", "--model", str(model / "model.bin"), "--registry", registry, "--prompts", "1"],
        ["force", *selection, "--questions", "1", "--deact-values", "0", "-1", "--concurrency", "2"],
        ["fallback", *selection, "--prompts", "2"],
        ["eval", "--model", str(model / "model.bin"), "--tasks", str(tasks / "pa.jsonl")],
        ["transfer", *selection, "--tasks-dir", str(tasks)],
        ["steer-generate", "--model", str(model / "model.bin"), "--prompt", "Q: abc? A:", "--registry", registry, "--max-tokens", "4"],
    ]
    for argv in runs:
        if "--out-dir" not in argv:
            argv = [*argv, "--out-dir", str(out)]
        assert main(argv) == EXIT_OK, argv[0]
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_rerunning_every_command_rewrites_identical_files(tmp_path):
    first = _pipeline(tmp_path)
    second = _pipeline(tmp_path)
    assert sorted(first) == sorted(second)
    changed = [name for name in first if first[name] != second[name]]
    assert changed == []
    assert {"out/overlap.json", "out/fallback.json", "out/steer_generate.json", "model/model.bin"} <= set(first)
