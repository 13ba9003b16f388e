import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from natlas.errors import StatsError, ValidationError
from natlas.lape import (
    ActivationStats,
    ColumnSketch,
    FilterConfig,
    FilterPopulation,
    NeuronSet,
    compute_lape,
    family_overlap,
    k_budget,
    lape_entropy,
    layer_histogram,
    load_neuron_sets,
    neuron_count_table,
    overlap,
    percentile,
    save_neuron_sets,
    select,
)


def _decimal_entropy(p):
    getcontext().prec = 50
    ps = [Decimal(repr(float(v))) for v in p]
    total = sum(ps)
    out = Decimal(0)
    for v in ps:
        if v > 0:
            q = v / total
            out -= q * q.ln()
    return float(out)


def test_lape_entropy_matches_a_decimal_oracle():
    rows = np.array([[0.5, 0.25, 0.25, 0.0], [0.9, 0.1, 0.0, 0.0], [0.3, 0.3, 0.3, 0.3], [1e-9, 0.7, 0.2, 0.1]])
    entropy, active = lape_entropy(rows)
    assert active.all()
    for row, h in zip(rows, entropy):
        assert h == pytest.approx(_decimal_entropy(row), abs=1e-12)
    assert entropy[2] == pytest.approx(math.log(4))


def test_lape_entropy_bounds_and_inactive_rows():
    entropy, active = lape_entropy(np.array([[0.0, 0.0, 0.0], [0.0, 0.4, 0.0]]))
    assert list(active) == [False, True]
    assert entropy[0] == pytest.approx(math.log(3))
    assert entropy[1] == 0.0


def _stats(active, tokens):
    """ActivationStats from an (n_layers, d_ff, n_langs) active-count array."""
    active = np.asarray(active, dtype=np.int64)
    n_layers, d_ff, n = active.shape
    zeros = np.zeros_like(active)
    sketches = tuple(tuple(ColumnSketch(d_ff, 8) for _ in range(n)) for _ in range(n_layers))
    return ActivationStats(
        languages=tuple(f"l{i}" for i in range(n)),
        active_counts=active,
        token_counts=np.asarray(tokens, dtype=np.int64),
        value_sums=zeros,
        positive_sums=zeros,
        sketches=sketches,
        model_digest="m",
        config={"context_len": 8, "stride": 8, "sketch_capacity": 8},
    )


def test_compute_lape_probabilities_and_gates():
    active = np.zeros((1, 4, 2))
    active[0, 0] = [10, 0]
    active[0, 1] = [5, 5]
    active[0, 2] = [0, 20]
    stats = _stats(active, [10, 20])
    table = compute_lape(stats, FilterConfig(50, 50))
    np.testing.assert_allclose(table.probs[0, 1], [0.5, 0.25])
    np.testing.assert_allclose(table.normalized[0, 1], [2 / 3, 1 / 3])
    assert table.entropy[0, 0] == 0.0
    assert not table.active[0, 3]
    assert table.d_total == 4


def test_compute_lape_rejects_unobserved_languages():
    with pytest.raises(StatsError):
        compute_lape(_stats(np.zeros((1, 2, 2)), [5, 0]))
    with pytest.raises(ValidationError):
        compute_lape(_stats(np.zeros((1, 2, 1)), [5]))
    with pytest.raises(ValidationError):
        compute_lape(_stats(np.zeros((1, 2, 2)), [5, 5]), FilterConfig(filter_percentile=0))


def test_k_budget_floors():
    assert k_budget(1, 1024) == 10
    assert k_budget(1, 3200) == 32
    assert k_budget(3.125, 1024) == 32
    with pytest.raises(ValidationError):
        k_budget(0, 100)


def test_planted_neurons_are_recovered_exactly(planted_sets, planted_ledger):
    assert sorted(planted_sets) == sorted(planted_ledger.neurons)
    for lang, neurons in planted_ledger.neurons.items():
        assert set(planted_sets[lang].neurons) == set(neurons)


def test_selection_is_nested_in_k(planted_table):
    previous: set = set()
    for k in (1, 2, 3, 4, 5):
        selection = select(planted_table, k)
        kept = set(selection.ranked)
        assert previous <= kept
        assert len(selection.ranked) <= k_budget(k, planted_table.d_total)
        assert sum(selection.multiplicity.values()) == len(selection.ranked)
        previous = kept


def test_selection_is_order_independent(planted_table):
    a = select(planted_table, 2)
    b = select(planted_table, 2)
    assert a.ranked == b.ranked
    assert {k: v.neurons for k, v in a.sets.items()} == {k: v.neurons for k, v in b.sets.items()}


def test_refiltering_with_value_population(planted_table):
    filters = FilterConfig(95, 95, FilterPopulation.VALUE)
    selection = select(planted_table, 1, filters)
    assert all(s.filters == filters for s in selection.sets.values())
    by_value = planted_table.refiltered(filters)
    assert by_value.filter_cut == percentile(planted_table.means, 95)
    assert by_value.thresholds == planted_table.thresholds
    np.testing.assert_array_equal(by_value.passed_threshold, planted_table.passed_threshold)


def test_neuron_sets_file_round_trip(planted_sets, tmp_path):
    path = save_neuron_sets(planted_sets.values(), tmp_path / "neurons.json")
    loaded = load_neuron_sets(path)
    assert loaded == planted_sets
    with pytest.raises(ValidationError):
        NeuronSet("pa", ((0, 1), (0, 1)), 1.0)


def test_layer_histogram_and_count_table():
    s = NeuronSet("a", ((0, 1), (2, 3), (2, 4)), 1.0)
    assert layer_histogram(s, 3) == [1, 0, 2]
    header, rows = neuron_count_table({2.0: {"a": s}, 1.0: {"a": NeuronSet("a", ((0, 1),), 1.0)}})
    assert header == ["language", "top-1%", "top-2%"]
    assert rows == [["a", 1, 3]]


def test_overlap_matrix_and_family_means():
    sets = {
        "a": NeuronSet("a", ((0, 1), (0, 2), (1, 1)), 1.0),
        "b": NeuronSet("b", ((0, 2), (1, 1)), 1.0),
        "c": NeuronSet("c", ((0, 2),), 1.0),
    }
    matrix = overlap(sets)
    assert matrix.languages == ("a", "b", "c")
    np.testing.assert_array_equal(matrix.counts, [[3, 2, 1], [2, 2, 1], [1, 1, 1]])
    np.testing.assert_allclose(matrix.percentages()[0], [100.0, 200 / 3, 100 / 3])
    within, across = family_overlap(matrix, {"a": "f0", "b": "f0", "c": "f1"})
    assert within == 2.0
    assert across == 1.0


def test_planted_sets_do_not_overlap(planted_sets):
    counts = overlap(planted_sets).counts
    assert (counts - np.diag(np.diag(counts)) == 0).all()
