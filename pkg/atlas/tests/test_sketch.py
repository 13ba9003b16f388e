import sys

import numpy as np
import pytest
from natlas.errors import StatsError, ValidationError
from natlas.lape import ColumnSketch, percentile
from natlas.lape.percentile import nearest_rank


def test_percentile_is_nearest_rank():
    values = np.arange(1, 101, dtype=np.float64)
    assert percentile(values, 95) == 95.0
    assert percentile(values, 100) == 100.0
    assert percentile(values, 0.5) == 1.0
    assert percentile(np.array([[3.0, 1.0], [2.0, 4.0]]), 50) == 2.0
    assert nearest_rank(10, 95) == 10


def test_large_populations_go_through_the_sketch(monkeypatch):
    monkeypatch.setattr(sys.modules["natlas.lape.percentile"], "EXACT_LIMIT", 1000)
    values = np.random.default_rng(3).permutation(np.arange(1, 10_001, dtype=np.float64))
    assert abs(percentile(values, 95) - 9500.0) <= 100.0
    assert percentile(values[:1000], 95) == float(np.sort(values[:1000])[949])


def test_percentile_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        percentile(np.arange(3.0), 0)
    with pytest.raises(ValidationError):
        percentile(np.arange(3.0), 101)
    with pytest.raises(ValidationError):
        percentile(np.array([]), 50)


def test_sketch_is_exact_before_any_compaction():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(300, 3))
    sk = ColumnSketch(3, capacity=512)
    sk.update(rows)
    assert sk.rank_error_bound() == 0.0
    expected = np.sort(rows, axis=0)[149]
    np.testing.assert_allclose(sk.quantile(0.5), expected.astype(np.float32))


def test_sketch_rank_error_stays_within_its_bound():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(20_000, 2)).astype(np.float32)
    sk = ColumnSketch(2, capacity=256)
    for start in range(0, len(rows), 1000):
        sk.update(rows[start : start + 1000])
    assert sk.count == 20_000
    bound = sk.rank_error_bound()
    assert 0 < bound < 0.05
    est = sk.quantile(0.5)
    true_rank = (rows <= est[None, :]).mean(axis=0)
    top_weight = 2 ** (len(sk.levels) - 1)
    assert np.all(np.abs(true_rank - 0.5) <= bound + top_weight / sk.count)


def test_sketch_merge_matches_counts_and_bounds():
    rng = np.random.default_rng(2)
    a_rows, b_rows = rng.normal(size=(3000, 1)), rng.normal(2.0, size=(3000, 1))
    a, b = ColumnSketch(1, 512), ColumnSketch(1, 512)
    a.update(a_rows)
    b.update(b_rows)
    merged = a.merge(b)
    assert merged.count == 6000
    both = np.concatenate([a_rows, b_rows]).astype(np.float32)
    est = merged.quantile(0.5)[0]
    assert merged.rank_error_bound() < 0.01
    assert abs((both <= est).mean() - 0.5) <= 0.01
    with pytest.raises(StatsError):
        a.merge(ColumnSketch(2, 512))


def test_sketch_empty_and_state_restore():
    sk = ColumnSketch(4)
    assert np.isnan(sk.quantile(0.5)).all()
    sk.update(np.arange(2000, dtype=np.float32).reshape(500, 4))
    restored = ColumnSketch.restore(sk.state(), sk.arrays())
    np.testing.assert_array_equal(restored.quantile(0.9), sk.quantile(0.9))
    with pytest.raises(StatsError):
        ColumnSketch(3, capacity=5)
    with pytest.raises(StatsError):
        ColumnSketch.restore(sk.state(), sk.arrays()[:-1] if len(sk.arrays()) > 1 else [])
