import numpy as np
import pytest
from natlas.corpus import EOS_ID, tokenize
from natlas.errors import ValidationError
from natlas.harness.prompts import question
from natlas.lens import LensMode, language_profile, lens_distributions, output_distribution, profile_suite, write_suite
from natlas.model import GenerationSettings, forward, generate


def test_last_lens_row_is_the_model_output(planted_decoder):
    tokens = tokenize("Q: abc? A:")
    dists = lens_distributions(planted_decoder, tokens)
    assert dists.shape == (planted_decoder.config.n_layers, planted_decoder.config.vocab_size)
    np.testing.assert_allclose(dists.sum(axis=1), 1.0)
    expected = output_distribution(forward(planted_decoder, tokens).logits[-1])
    np.testing.assert_array_equal(dists[-1], expected)


def test_final_lens_argmax_is_the_first_greedy_token(planted_decoder, planted_registry):
    first_token = GenerationSettings(max_tokens=1)
    prompts = [question(spec, i, seed=13) for spec in planted_registry for i in range(25)]
    assert len(prompts) == 100
    for prompt in prompts:
        tokens = tokenize(prompt)
        dists = lens_distributions(planted_decoder, tokens)
        expected = output_distribution(forward(planted_decoder, tokens).logits[-1])
        np.testing.assert_array_equal(dists[-1], expected)
        emitted = generate(planted_decoder, tokens, settings=first_token)
        assert (emitted[0] if emitted else EOS_ID) == int(np.argmax(dists[-1]))


def test_target_language_emerges_in_the_planted_layers(planted_decoder, planted_registry):
    prompt = question(planted_registry["pa"], 0, seed=3)
    dists = lens_distributions(planted_decoder, tokenize(prompt))
    profile = language_profile(dists, "pa", "pb", planted_registry)
    np.testing.assert_allclose(profile.language_mass.sum(axis=1), 1.0)
    assert profile.target_prob[0] < 0.5
    assert profile.target_prob[-1] > 0.9
    assert profile.pivot_prob[-1] < 0.05
    assert profile.entropy[-1] < profile.entropy[0]
    assert len(profile.top_tokens[-1]) == 5
    assert profile.top_tokens[-1][0][0] in "abcdef"


def test_top1_mode_counts_only_the_argmax_token(planted_decoder, planted_registry):
    prompt = question(planted_registry["pa"], 1, seed=3)
    dists = lens_distributions(planted_decoder, tokenize(prompt))
    profile = language_profile(dists, "pa", "pa", planted_registry, mode=LensMode.TOP1)
    assert profile.target_prob[-1] == 1.0
    assert set(np.unique(profile.language_mass)) <= {0.0, 1.0}


def test_profile_suite_and_report_files(planted_decoder, planted_registry, tmp_path):
    prompts = {"pa": [question(planted_registry["pa"], i, seed=5) for i in range(2)], "pb": [question(planted_registry["pb"], 0, seed=5)]}
    suite = profile_suite(planted_decoder, prompts, planted_registry, concurrency=2)
    assert suite.pivot == planted_registry.pivot()
    assert [len(suite.profiles[lang]) for lang in ("pa", "pb")] == [2, 1]
    curves = suite.mean_curves("pb")
    assert curves["target_prob"][-1] > 0.9
    assert len(suite.csv_rows()) == 2 * planted_decoder.config.n_layers
    written = write_suite(suite, tmp_path, {"command": "lens"})
    assert sorted(p.name for p in written) == [
        "lens_evolution.svg",
        "lens_heatmap.svg",
        "lens_pivot_prob.svg",
        "lens_profile.csv",
        "lens_profile.json",
        "lens_target_prob.svg",
    ]
    assert all(p.exists() for p in written)
    with pytest.raises(ValidationError):
        profile_suite(planted_decoder, {}, planted_registry)
