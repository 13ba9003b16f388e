"""Experiment runners and report writers."""

from .emit import emit_csv, emit_heatmap_svg, emit_json, emit_line_plot_svg, emit_stacked_bar_svg
from .evaluate import EvalResult, EvalTask, Metric, TransferReport, char_f1, exact_match, load_tasks, run_eval, run_transfer
from .fallback import FallbackReport, run_fallback
from .forcing import Family, ForcingConfig, ForcingReport, Strategy, run_forcing, run_forcing_sweep, sweep_table
from .prompts import fallback_prompts, forcing_questions

__all__ = [
    "EvalResult",
    "EvalTask",
    "FallbackReport",
    "Family",
    "ForcingConfig",
    "ForcingReport",
    "Metric",
    "Strategy",
    "TransferReport",
    "char_f1",
    "emit_csv",
    "emit_heatmap_svg",
    "emit_json",
    "emit_line_plot_svg",
    "emit_stacked_bar_svg",
    "exact_match",
    "fallback_prompts",
    "forcing_questions",
    "load_tasks",
    "run_eval",
    "run_fallback",
    "run_forcing",
    "run_forcing_sweep",
    "run_transfer",
    "sweep_table",
]
