import threading
import time

import pytest
from natlas.errors import ValidationError
from natlas.workers import run_cells


def test_run_cells_returns_results_in_key_order():
    def slow(v):
        time.sleep(0.01 * (3 - v))
        return v * v

    cells = [(k, lambda k=k: slow(k)) for k in (2, 0, 1)]
    results = run_cells(cells, concurrency=3)
    assert list(results) == [0, 1, 2]
    assert results == {0: 0, 1: 1, 2: 4}


def test_run_cells_caps_parallelism():
    active = 0
    peak = 0
    lock = threading.Lock()

    def cell():
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.01)
        with lock:
            active -= 1

    run_cells([(i, cell) for i in range(8)], concurrency=2)
    assert peak <= 2


def test_run_cells_reraises_smallest_failing_key():
    def boom(msg):
        raise RuntimeError(msg)

    cells = [(1, lambda: boom("one")), (0, lambda: 0), (2, lambda: boom("two"))]
    with pytest.raises(RuntimeError, match="one"):
        run_cells(cells, concurrency=2)


def test_run_cells_rejects_bad_input():
    with pytest.raises(ValidationError):
        run_cells([(0, lambda: 0)], concurrency=0)
    with pytest.raises(ValidationError):
        run_cells([(0, lambda: 0), (0, lambda: 1)])
    assert run_cells([], concurrency=4) == {}
