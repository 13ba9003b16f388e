import json
import logging

import numpy as np
import pytest
from natlas.logging import jlog, run_context, run_id, stage


def _records(caplog):
    return [json.loads(r.getMessage()) for r in caplog.records if r.name == "natlas"]


def test_run_and_stage_fields_reach_every_record(caplog):
    caplog.set_level(logging.INFO, logger="natlas")
    with run_context("identify", 7, "out/identify") as rid:
        with stage("select", k=[1.0, 2.0]):
            jlog("info", event="selection_done", sizes=np.array([3, 4]), kept=np.int64(7))
    assert rid == run_id("identify", 7, "out/identify")
    assert rid.startswith("identify-7-")
    start, done, end = _records(caplog)
    assert [start["event"], done["event"], end["event"]] == ["stage_start", "selection_done", "stage_done"]
    assert all(r["run_id"] == rid and r["stage"] == "select" and r["seed"] == 7 for r in (start, done, end))
    assert start["k"] == [1.0, 2.0]
    assert (done["sizes"], done["kept"]) == ([3, 4], 7)
    assert end["elapsed_s"] >= 0


def test_failed_stage_is_logged_and_reraised(caplog):
    caplog.set_level(logging.INFO, logger="natlas")
    with pytest.raises(RuntimeError):
        with stage("accumulate"):
            raise RuntimeError("shard 2 failed")
    failed = _records(caplog)[-1]
    assert (failed["event"], failed["stage"], failed["error_type"]) == ("stage_failed", "accumulate", "RuntimeError")
    jlog("info", event="after")
    assert "stage" not in _records(caplog)[-1]


def test_run_ids_differ_by_seed_and_output():
    assert run_id("force", 1, "a") != run_id("force", 2, "a")
    assert run_id("force", 1, "a") != run_id("force", 1, "b")
