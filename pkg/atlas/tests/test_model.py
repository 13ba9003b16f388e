import numpy as np
import pytest
import torch
from natlas.corpus import LanguageRegistry, planted_languages, synthesize_corpus
from natlas.corpus.tokenizer import VOCAB_SIZE, tokenize
from natlas.errors import ConfigError, CorruptHeaderError, DirectiveError, ShapeMismatchError, TruncatedBlobError, ValidationError
from natlas.model import (
    Checkpoint,
    GenerationSettings,
    ModelConfig,
    TinyDecoder,
    TrainHyper,
    add,
    checkpoint_from_bytes,
    compile_directives,
    forward,
    generate,
    init_checkpoint,
    load_checkpoint,
    multiply,
    save_checkpoint,
    set_to,
    train_tiny,
)
from natlas.model.directives import DirectiveMode, TapDirective
from natlas.model.generate import apply_repetition_penalty
from natlas.model.train import lr_at


def _config(**overrides):
    values = dict(n_layers=2, d_model=16, d_ff=32, n_heads=2, vocab_size=VOCAB_SIZE, max_seq_len=32)
    values.update(overrides)
    return ModelConfig(**values)


def _decoder(seed=0, **overrides):
    return TinyDecoder.from_checkpoint(init_checkpoint(_config(**overrides), seed))


def test_config_validation_and_dict_round_trip():
    config = _config()
    config.validate()
    assert ModelConfig.from_dict(config.to_dict()) == config
    assert config.n_neurons == 64
    with pytest.raises(ConfigError):
        _config(d_model=18, n_heads=2).validate()
    with pytest.raises(ConfigError):
        _config(d_model=15, n_heads=2).validate()
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"n_layers": 2})


def test_checkpoint_bytes_round_trip_is_bit_exact(tmp_path):
    ckpt = init_checkpoint(_config(), seed=3)
    path = save_checkpoint(ckpt, tmp_path / "model.bin")
    loaded = load_checkpoint(path)
    assert loaded.config == ckpt.config
    for name, arr in ckpt.tensors.items():
        assert np.array_equal(loaded.tensors[name], arr)
    assert loaded.to_bytes() == ckpt.to_bytes()
    assert loaded.digest() == ckpt.digest()


def test_checkpoint_rejects_corrupt_payloads():
    payload = init_checkpoint(_config(), seed=0).to_bytes()
    with pytest.raises(CorruptHeaderError):
        checkpoint_from_bytes(b"")
    with pytest.raises(CorruptHeaderError):
        checkpoint_from_bytes(b"NOTMAGIC" + payload[8:])
    with pytest.raises(TruncatedBlobError):
        checkpoint_from_bytes(payload[:-4])


def test_checkpoint_validate_reports_shape_mismatch():
    ckpt = init_checkpoint(_config(), seed=0)
    tensors = dict(ckpt.tensors)
    tensors["embed"] = np.zeros((3, 3), dtype=np.float32)
    with pytest.raises(ShapeMismatchError):
        Checkpoint(ckpt.config, tensors).validate()
    del tensors["embed"]
    with pytest.raises(ShapeMismatchError):
        Checkpoint(ckpt.config, tensors).validate()


def test_forward_shapes_and_tap_is_what_down_projection_reads():
    model = _decoder()
    tokens = tokenize("hello")
    result = forward(model, tokens)
    assert result.logits.shape == (5, VOCAB_SIZE)
    assert [t.layer for t in result.taps] == [0, 1]
    assert result.taps[0].values.shape == (5, 32)
    assert len(result.hiddens) == 2

    with torch.inference_mode():
        x = model.embed(torch.tensor([tokens]))
        blk = model.layers[0]
        h = x + blk.attn(blk.attn_norm(x))
        expected = blk.ffn.activation(blk.ffn_norm(h))[0]
    torch.testing.assert_close(result.taps[0].values, expected)


def test_forward_rejects_bad_tokens():
    model = _decoder()
    with pytest.raises(ValidationError):
        forward(model, [])
    with pytest.raises(ValidationError):
        forward(model, [VOCAB_SIZE])
    with pytest.raises(ValidationError):
        forward(model, [1] * 33)


def test_add_zero_is_bit_identical_to_no_directive():
    model = _decoder(seed=1)
    tokens = tokenize("abcabc")
    plain = forward(model, tokens)
    edited = forward(model, tokens, [add(0, 0.0), add(1, [0.0, 0.0], [3, 4])])
    assert torch.equal(plain.logits, edited.logits)
    for a, b in zip(plain.taps, edited.taps):
        assert torch.equal(a.values, b.values)


def _random_prompts(n, max_len, seed):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, VOCAB_SIZE, size=int(rng.integers(1, max_len + 1))).tolist() for _ in range(n)]


def test_neutral_directives_reproduce_the_plain_forward_pass():
    model = _decoder(seed=4)
    last = model.config.n_layers - 1
    for tokens in _random_prompts(50, model.config.max_seq_len, seed=9):
        plain = forward(model, tokens)
        for directives in ([multiply(0, 1.0), multiply(last, 1.0, [2, 5])], [add(0, 0.0), add(last, [0.0, 0.0], [1, 6])]):
            assert torch.equal(forward(model, tokens, directives).logits, plain.logits)
        # pinning the last layer to its own values leaves the final position untouched
        own = plain.taps[last].values[-1].tolist()
        pinned = forward(model, tokens, [set_to(last, own)])
        assert torch.equal(pinned.logits[-1], plain.logits[-1])
        assert torch.equal(pinned.taps[last].values[-1], plain.taps[last].values[-1])


def test_multiply_zero_then_add_leaves_exactly_the_added_value():
    model = _decoder(seed=2)
    tokens = tokenize("xyz")
    result = forward(model, tokens, [add(1, [0.5, -2.0], [7, 9]), multiply(1, 0.0, [7, 9])])
    assert torch.equal(result.taps[1].values[:, 7], torch.full((3,), 0.5))
    assert torch.equal(result.taps[1].values[:, 9], torch.full((3,), -2.0))

    zeroed = forward(model, tokens, [multiply(0, 0.0)])
    assert torch.count_nonzero(zeroed.taps[0].values) == 0


def test_set_runs_after_add_and_multiply():
    model = _decoder(seed=2)
    result = forward(model, tokenize("xyz"), [set_to(0, 3.0, [1]), add(0, 10.0, [1]), multiply(0, 5.0, [1])])
    assert torch.equal(result.taps[0].values[:, 1], torch.full((3,), 3.0))


def test_directives_are_validated():
    config = _config()
    with pytest.raises(DirectiveError):
        compile_directives([add(2, 1.0)], config)
    with pytest.raises(DirectiveError):
        compile_directives([add(0, 1.0, [32])], config)
    with pytest.raises(DirectiveError):
        compile_directives([add(0, [1.0, 2.0], [1, 1])], config)
    with pytest.raises(DirectiveError):
        compile_directives([add(0, [1.0], [1, 2])], config)
    with pytest.raises(DirectiveError):
        compile_directives([TapDirective(0, DirectiveMode.MULTIPLY, (1,), (2.0,))], config)


def test_directive_json_round_trip():
    d = set_to(1, [0.5, -1.0], [2, 5])
    assert TapDirective.from_json(d.to_json()) == d
    with pytest.raises(DirectiveError):
        TapDirective.from_json({"layer": 0})


def test_repetition_penalty_divides_positive_and_multiplies_negative():
    logits = np.array([2.0, -2.0, 1.0])
    out = apply_repetition_penalty(logits, [0, 1, 1], 2.0)
    np.testing.assert_allclose(out, [1.0, -4.0, 1.0])
    assert apply_repetition_penalty(logits, [0], 1.0) is logits


def test_greedy_generation_is_deterministic_and_bounded():
    model = _decoder(seed=4)
    settings = GenerationSettings(max_tokens=6, stop_ids=())
    out = generate(model, tokenize("ab"), settings=settings)
    assert len(out) == 6
    assert out == generate(model, tokenize("ab"), settings=settings)


def test_generation_settings_are_validated():
    model = _decoder()
    with pytest.raises(ValidationError):
        generate(model, tokenize("a"), settings=GenerationSettings(max_tokens=0))
    with pytest.raises(ValidationError):
        generate(model, tokenize("a"), settings=GenerationSettings(temperature=-1.0))


def test_lr_schedule_warms_up_then_decays():
    assert lr_at(0, 1000, 1.0) == pytest.approx(0.01)
    assert lr_at(99, 1000, 1.0) == pytest.approx(1.0)
    assert lr_at(999, 1000, 1.0) == pytest.approx(0.1, abs=1e-4)


def _tiny_corpus():
    registry = LanguageRegistry(planted_languages(2, 4, seed=0))
    return synthesize_corpus(registry, 4, 40, seed=0)


def test_train_zero_steps_returns_the_seeded_initialization():
    config = _config()
    ckpt = train_tiny(_tiny_corpus(), config, TrainHyper(steps=0, seed=5))
    assert ckpt.to_bytes() == init_checkpoint(config, 5).to_bytes()


def test_train_is_reproducible_for_a_seed():
    config = _config()
    hyper = TrainHyper(steps=3, batch=2, seed=1, seq_len=16)
    first = train_tiny(_tiny_corpus(), config, hyper)
    second = train_tiny(_tiny_corpus(), config, hyper)
    assert first.to_bytes() == second.to_bytes()
    assert first.to_bytes() != init_checkpoint(config, 1).to_bytes()
