"""Metadata helpers for report files."""

from __future__ import annotations

from collections import OrderedDict
from typing import Any
from typing import OrderedDict as OrderedDictType

SCHEMA_VERSION = 1


def build_report_metadata(
    *,
    kind: str,
    toolkit_version: str,
    seed: int | None = None,
    model_digest: str | None = None,
    stats_digest: str | None = None,
    params: dict[str, Any] | None = None,
) -> OrderedDictType[str, Any]:
    """Return report metadata with deterministic ordering for auditability."""

    md: OrderedDictType[str, Any] = OrderedDict()
    md["schema_version"] = SCHEMA_VERSION
    md["kind"] = kind
    md["toolkit_version"] = toolkit_version
    if seed is not None:
        md["seed"] = seed
    if model_digest:
        md["model_digest"] = model_digest
    if stats_digest:
        md["stats_digest"] = stats_digest
    if params:
        md["params"] = OrderedDict(sorted(params.items()))
    return md


__all__ = ["SCHEMA_VERSION", "build_report_metadata"]
