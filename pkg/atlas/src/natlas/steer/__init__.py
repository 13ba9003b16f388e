"""Intervention plans: activation, deactivation, replacement and difference-of-means steering."""

from .plans import (
    BoostDenominator,
    BoostVector,
    DiffMeanLayers,
    DiffMeanVector,
    InterventionPlan,
    ReplaceStatistic,
    StepKind,
    compose,
    compute_boosts,
    compute_diffmean,
    diffmean_vector,
    load_plan,
    plan_activate,
    plan_deactivate,
    plan_diffmean,
    plan_replace,
    save_plan,
)

__all__ = [
    "BoostDenominator",
    "BoostVector",
    "DiffMeanLayers",
    "DiffMeanVector",
    "InterventionPlan",
    "ReplaceStatistic",
    "StepKind",
    "compose",
    "compute_boosts",
    "compute_diffmean",
    "diffmean_vector",
    "load_plan",
    "plan_activate",
    "plan_deactivate",
    "plan_diffmean",
    "plan_replace",
    "save_plan",
]
