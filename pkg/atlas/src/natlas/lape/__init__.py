"""Activation statistics, LAPE scoring and language-neuron selection."""

from .percentile import percentile
from .reports import OverlapMatrix, family_overlap, layer_distribution, layer_histogram, neuron_count_table, overlap
from .select import NeuronSet, Selection, k_budget, load_neuron_sets, save_neuron_sets, select
from .sketch import ColumnSketch
from .stats import AccumulateConfig, ActivationStats, accumulate, load_stats, merge, save_stats
from .table import FilterConfig, FilterPopulation, LapeTable, compute_lape, lape_entropy

__all__ = [
    "AccumulateConfig",
    "ActivationStats",
    "ColumnSketch",
    "FilterConfig",
    "FilterPopulation",
    "LapeTable",
    "NeuronSet",
    "OverlapMatrix",
    "Selection",
    "accumulate",
    "compute_lape",
    "family_overlap",
    "k_budget",
    "lape_entropy",
    "layer_distribution",
    "layer_histogram",
    "load_neuron_sets",
    "load_stats",
    "merge",
    "neuron_count_table",
    "overlap",
    "percentile",
    "save_neuron_sets",
    "save_stats",
    "select",
]
