"""Report writers: JSON, CSV and SVG figures with byte-stable output.

Figures are drawn on bare ``matplotlib.figure.Figure`` objects (no pyplot
state) with a fixed SVG hash salt, no creation date and text kept as text, so
identical inputs produce identical bytes. Heatmap colours are a linear
min-to-max scale over the matrix (or the explicit ``vmin``/``vmax``).
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import matplotlib
import numpy as np
from matplotlib.colors import Normalize
from matplotlib.figure import Figure

from ..storage import write_artifact, write_text_artifact

SVG_RC = {"svg.hashsalt": "natlas", "svg.fonttype": "none", "font.size": 9}
HEATMAP_CMAP = "viridis"


def _json_ready(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return _json_ready(value.item())
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def emit_json(report: Mapping[str, Any], path: str | Path) -> Path:
    """Key order is preserved; non-finite floats become null."""
    return write_text_artifact(path, json.dumps(_json_ready(report), indent=2, ensure_ascii=False, allow_nan=False) + "\n")


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return "" if not math.isfinite(float(value)) else f"{float(value):.6f}"
    return str(value)


def emit_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], path: str | Path) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return write_text_artifact(path, buf.getvalue())


def _save_svg(fig: Figure, path: str | Path) -> Path:
    buf = io.BytesIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
    return write_artifact(path, buf.getvalue())


def emit_heatmap_svg(
    matrix: np.ndarray,
    row_labels: Sequence[str],
    col_labels: Sequence[str],
    path: str | Path,
    *,
    title: str = "",
    vmin: float | None = None,
    vmax: float | None = None,
    fmt: str = "{:.2f}",
    xlabel: str = "",
    ylabel: str = "",
) -> Path:
    data = np.asarray(matrix, dtype=np.float64)
    finite = data[np.isfinite(data)]
    lo = vmin if vmin is not None else (float(finite.min()) if finite.size else 0.0)
    hi = vmax if vmax is not None else (float(finite.max()) if finite.size else 1.0)
    if hi <= lo:
        hi = lo + 1.0
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(1.2 + 0.6 * len(col_labels), 1.0 + 0.5 * len(row_labels)))
        ax = fig.add_subplot()
        image = ax.imshow(data, cmap=HEATMAP_CMAP, norm=Normalize(vmin=lo, vmax=hi), aspect="auto")
        ax.set_xticks(range(len(col_labels)), labels=list(col_labels))
        ax.set_yticks(range(len(row_labels)), labels=list(row_labels))
        for i in range(data.shape[0]):
            for j in range(data.shape[1]):
                if np.isfinite(data[i, j]):
                    ax.text(j, i, fmt.format(data[i, j]), ha="center", va="center", color="w" if data[i, j] < (lo + hi) / 2 else "k")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.colorbar(image, ax=ax)
        return _save_svg(fig, path)


def emit_line_plot_svg(
    series: Mapping[str, Sequence[float]],
    path: str | Path,
    *,
    title: str = "",
    xlabel: str = "layer",
    ylabel: str = "",
    ylim: tuple[float, float] | None = None,
) -> Path:
    """One line per series key (sorted), x = 0..len-1."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.0, 3.5))
        ax = fig.add_subplot()
        for name in sorted(series):
            ys = list(series[name])
            ax.plot(range(len(ys)), ys, marker="o", markersize=3, label=name)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if ylim is not None:
            ax.set_ylim(*ylim)
        if series:
            ax.legend(loc="best", fontsize=7)
        ax.grid(True, linewidth=0.3)
        return _save_svg(fig, path)


def emit_stacked_bar_svg(stacks: Mapping[str, Sequence[int]], path: str | Path, *, title: str = "", xlabel: str = "layer") -> Path:
    """Stacked counts per x position, one segment per key (sorted)."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.0, 3.5))
        ax = fig.add_subplot()
        width = max((len(v) for v in stacks.values()), default=0)
        bottom = np.zeros(width)
        for name in sorted(stacks):
            counts = np.asarray(stacks[name], dtype=np.float64)
            ax.bar(range(width), counts, bottom=bottom, label=name)
            bottom += counts
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("neurons")
        if stacks:
            ax.legend(loc="best", fontsize=7)
        return _save_svg(fig, path)


__all__ = ["emit_csv", "emit_heatmap_svg", "emit_json", "emit_line_plot_svg", "emit_stacked_bar_svg"]
