import numpy as np
import pytest
from natlas.corpus import Corpus
from natlas.errors import CorpusError, StatsError, ValidationError
from natlas.lape import AccumulateConfig, accumulate, load_stats, merge, save_stats
from natlas.lape.stats import VALUE_SUM_SCALE, stats_from_bytes, windows


def test_windows_count_every_position_once():
    spans = windows(10, 4, 3)
    assert spans == [(0, 4, 0), (3, 7, 4), (6, 10, 7)]
    covered = [p for start, end, first_new in spans for p in range(first_new, end)]
    assert covered == list(range(10))
    assert windows(3, 8, 4) == [(0, 3, 0)]


def test_accumulate_counts_every_token(planted_stats, planted_corpus):
    for li, lang in enumerate(planted_stats.languages):
        assert planted_stats.token_counts[li] == planted_corpus.n_bytes(lang)
    assert planted_stats.active_counts.shape == (4, 800, 4)
    planted_stats.check_consistent()


def test_planted_neurons_are_active_only_in_their_language(planted_stats, planted_ledger):
    for lang, neurons in planted_ledger.neurons.items():
        li = planted_stats.lang_index(lang)
        for layer, idx in neurons:
            counts = planted_stats.active_counts[layer, idx]
            assert counts[li] == planted_stats.token_counts[li]
            assert counts.sum() == counts[li]


def test_stats_file_round_trip(planted_stats, tmp_path):
    path = save_stats(planted_stats, tmp_path / "stats.bin")
    loaded = load_stats(path)
    assert loaded.languages == planted_stats.languages
    assert np.array_equal(loaded.value_sums, planted_stats.value_sums)
    assert loaded.to_bytes() == planted_stats.to_bytes()
    np.testing.assert_array_equal(loaded.medians("pa"), planted_stats.medians("pa"))
    with pytest.raises(StatsError):
        stats_from_bytes(path.read_bytes().replace(b'"format_version":1', b'"format_version":9', 1))


def _halves(corpus):
    first = {lang: list(range(0, len(docs), 2)) for lang, docs in corpus.documents.items()}
    second = {lang: list(range(1, len(docs), 2)) for lang, docs in corpus.documents.items()}
    return corpus.subset(first), corpus.subset(second)


def test_merge_of_disjoint_halves_equals_accumulating_everything(planted_ckpt, planted_corpus, planted_stats):
    config = AccumulateConfig(context_len=64, stride=32)
    left, right = _halves(planted_corpus)
    a = accumulate(planted_ckpt, left, config)
    b = accumulate(planted_ckpt, right, config)
    for combined in (merge(a, b), merge(b, a)):
        assert np.array_equal(combined.active_counts, planted_stats.active_counts)
        assert np.array_equal(combined.token_counts, planted_stats.token_counts)
        assert np.array_equal(combined.value_sums, planted_stats.value_sums)
        assert np.array_equal(combined.positive_sums, planted_stats.positive_sums)
        assert combined.max_rank_error() < 0.01


def test_worker_shards_match_a_single_worker(planted_ckpt, planted_corpus, planted_stats):
    sharded = accumulate(planted_ckpt, planted_corpus, AccumulateConfig(context_len=64, stride=32, workers=3))
    assert np.array_equal(sharded.active_counts, planted_stats.active_counts)
    assert np.array_equal(sharded.value_sums, planted_stats.value_sums)


def test_merge_rejects_different_provenance(planted_ckpt, planted_corpus, planted_stats):
    left, _ = _halves(planted_corpus)
    other = accumulate(planted_ckpt, left, AccumulateConfig(context_len=32, stride=32))
    with pytest.raises(StatsError):
        merge(planted_stats, other)


def test_means_use_fixed_point_sums(planted_stats):
    means = planted_stats.mean_activations()
    li = planted_stats.lang_index("pb")
    expected = planted_stats.value_sums[3, 5, li] / VALUE_SUM_SCALE / planted_stats.token_counts[li]
    assert means[3, 5, li] == pytest.approx(expected)
    assert planted_stats.value_sum(3, 5, "pb") == pytest.approx(planted_stats.value_sums[3, 5, li] / VALUE_SUM_SCALE)
    with pytest.raises(StatsError):
        planted_stats.lang_index("zz")


def test_accumulate_rejects_bad_input(planted_ckpt, planted_registry):
    with pytest.raises(CorpusError):
        accumulate(planted_ckpt, Corpus(documents={}, provenance="empty"))
    with pytest.raises(CorpusError):
        accumulate(planted_ckpt, Corpus(documents={"zz": (b"abc",)}, provenance="x"), registry=planted_registry)
    with pytest.raises(ValidationError):
        accumulate(planted_ckpt, Corpus(documents={"pa": (b"abc",)}, provenance="x"), AccumulateConfig(context_len=8, stride=9))
