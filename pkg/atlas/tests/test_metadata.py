from natlas.metadata import SCHEMA_VERSION, build_report_metadata
from natlas.versioning import get_toolkit_version


def test_build_report_metadata_includes_optional_fields_when_provided():
    md = build_report_metadata(
        kind="force",
        toolkit_version="natlas-force:0.1.0",
        seed=3,
        model_digest="a" * 64,
        stats_digest="b" * 64,
        params={"k": [1.0], "deact_mode": "multiply"},
    )
    assert md["schema_version"] == SCHEMA_VERSION
    assert md["kind"] == "force"
    assert md["seed"] == 3
    assert md["model_digest"] == "a" * 64
    assert list(md["params"]) == ["deact_mode", "k"]
    assert list(md)[:3] == ["schema_version", "kind", "toolkit_version"]


def test_build_report_metadata_omits_optional_fields_when_absent():
    md = build_report_metadata(kind="overlap", toolkit_version="natlas:0.1.0")
    assert "seed" not in md
    assert "model_digest" not in md
    assert "stats_digest" not in md
    assert "params" not in md


def test_get_toolkit_version_env_override(monkeypatch):
    monkeypatch.delenv("NATLAS_VERSION", raising=False)
    assert get_toolkit_version("lens").startswith("natlas-lens:")
    monkeypatch.setenv("NATLAS_VERSION", "pinned")
    assert get_toolkit_version("lens") == "pinned"
