import numpy as np
import pytest
import torch
from natlas.corpus import tokenize
from natlas.errors import PlanConflictError, ValidationError
from natlas.lape import ActivationStats, ColumnSketch, NeuronSet
from natlas.lape.stats import VALUE_SUM_SCALE
from natlas.model import DirectiveMode, forward
from natlas.steer import (
    BoostDenominator,
    DiffMeanLayers,
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


def _stats():
    """Two languages, one layer, three neurons with hand-picked sums."""
    tokens = np.array([3, 2], dtype=np.int64)
    active = np.array([[[3, 0], [1, 2], [0, 0]]], dtype=np.int64)
    sums = np.array([[[6.0, 0.0], [1.5, -2.0], [-0.3, 0.4]]])
    positive = np.array([[[6.0, 0.0], [1.5, 0.5], [0.0, 0.4]]])
    sketch = ColumnSketch(3, 8)
    sketch.update(np.array([[1.0, 0.0, -0.1], [2.0, 0.5, -0.1], [3.0, 1.0, -0.1]]))
    return ActivationStats(
        languages=("a", "b"),
        active_counts=active,
        token_counts=tokens,
        value_sums=np.rint(sums * VALUE_SUM_SCALE).astype(np.int64),
        positive_sums=np.rint(positive * VALUE_SUM_SCALE).astype(np.int64),
        sketches=((sketch, ColumnSketch(3, 8)),),
        model_digest="m",
        config={"context_len": 8, "stride": 8, "sketch_capacity": 8},
    )


def test_boosts_divide_by_all_tokens_or_active_tokens():
    stats = _stats()
    s = NeuronSet("a", ((0, 0), (0, 1)), 1.0)
    assert compute_boosts(stats, s).values == pytest.approx((2.0, 0.5))
    assert compute_boosts(stats, s, BoostDenominator.ACTIVE).values == pytest.approx((2.0, 1.5))


def test_activate_plan_adds_boosts_per_layer():
    stats = _stats()
    s = NeuronSet("a", ((0, 0), (0, 1)), 1.0)
    plan = plan_activate(s, compute_boosts(stats, s))
    assert len(plan) == 1
    d = plan.directives[0]
    assert d.mode is DirectiveMode.ADD
    assert d.indices == (0, 1)
    assert d.values == pytest.approx((2.0, 0.5))
    assert plan.kinds == (StepKind.ACTIVATE,)
    with pytest.raises(ValidationError):
        plan_activate(NeuronSet("b", ((0, 0),), 1.0), compute_boosts(stats, s))


def test_deactivate_defaults_to_multiply_zero():
    s = NeuronSet("a", ((0, 2), (1, 0)), 1.0)
    plan = plan_deactivate(s)
    assert [d.mode for d in plan.directives] == [DirectiveMode.MULTIPLY] * 2
    assert [d.layer for d in plan.directives] == [0, 1]
    set_plan = plan_deactivate(s, -1.0, DirectiveMode.SET)
    assert [d.values for d in set_plan.directives] == [-1.0, -1.0]
    assert set_plan.recipe == "deactivate:a(set -1)"
    with pytest.raises(ValidationError):
        plan_deactivate(s, 1.0, DirectiveMode.ADD)


def test_replace_uses_mean_or_sketch_median():
    stats = _stats()
    s = NeuronSet("a", ((0, 0), (0, 1)), 1.0)
    mean_plan = plan_replace(s, stats)
    assert mean_plan.directives[0].mode is DirectiveMode.SET
    assert mean_plan.directives[0].values == pytest.approx((2.0, 0.5))
    median_plan = plan_replace(s, stats, ReplaceStatistic.MEDIAN)
    assert median_plan.directives[0].values == pytest.approx((2.0, 0.5))


def test_diffmean_is_target_mean_minus_pooled_others():
    np.testing.assert_allclose(diffmean_vector(np.array([3.0, 1.0]), np.array([1.0, 2.0])).vectors, [2.0, -1.0])
    stats = _stats()
    a = compute_diffmean(stats, "a")
    b = compute_diffmean(stats, "b")
    np.testing.assert_allclose(a.vectors[0], [2.0, 1.5, -0.3])
    np.testing.assert_allclose(a.vectors, -b.vectors)


def test_diffmean_layers_selection():
    stats = _stats()
    dense = plan_diffmean(stats, "a", 2.0)
    assert len(dense) == 1 and dense.directives[0].indices is None
    assert dense.directives[0].values == pytest.approx((4.0, 3.0, -0.6))
    s = NeuronSet("a", ((0, 1),), 1.0)
    selected = plan_diffmean(stats, "a", 1.0, layers=DiffMeanLayers.SELECTED, neuron_set=s)
    assert [d.layer for d in selected.directives] == [0]
    with pytest.raises(ValidationError):
        plan_diffmean(stats, "a", layers=DiffMeanLayers.SELECTED)


def test_diffmean_scale_zero_is_the_identity(planted_decoder, planted_stats):
    tokens = tokenize("Q: abc? A:")
    plain = forward(planted_decoder, tokens)
    steered = forward(planted_decoder, tokens, plan_diffmean(planted_stats, "pb", 0.0).directives)
    assert torch.equal(plain.logits, steered.logits)


def test_compose_puts_deactivation_first_and_folds_sets_with_adds():
    stats = _stats()
    target = NeuronSet("a", ((0, 0), (0, 1)), 1.0)
    act = plan_activate(target, compute_boosts(stats, target))
    deact = plan_deactivate(NeuronSet("b", ((0, 1), (0, 2)), 1.0), -1.0, DirectiveMode.SET)
    plan = compose(act, deact, d_ff=3)
    assert plan.kinds[0] is StepKind.DEACTIVATE
    assert plan.recipe == "deactivate:b(set -1) + activate:a(add b)"
    folded = plan.directives[0]
    assert folded.mode is DirectiveMode.SET
    assert folded.indices == (1, 2)
    assert folded.values == pytest.approx((-0.5, -1.0))


def test_compose_rejects_conflicting_sets():
    x = plan_deactivate(NeuronSet("a", ((0, 1),), 1.0), -1.0, DirectiveMode.SET)
    y = plan_deactivate(NeuronSet("b", ((0, 1),), 1.0), 2.0, DirectiveMode.SET)
    with pytest.raises(PlanConflictError) as info:
        compose(x, y, d_ff=4)
    assert (info.value.layer, info.value.neuron) == (0, 1)
    assert compose(x, x, d_ff=4).recipe == "deactivate:a(set -1) + deactivate:a(set -1)"
    assert compose().recipe == "baseline"


def test_plan_file_round_trip(tmp_path):
    stats = _stats()
    s = NeuronSet("a", ((0, 0), (0, 1)), 1.0)
    plan = compose(plan_deactivate(NeuronSet("b", ((0, 2),), 1.0)), plan_activate(s, compute_boosts(stats, s)))
    loaded = load_plan(save_plan(plan, tmp_path / "plan.json"))
    assert loaded == plan
    with pytest.raises(ValidationError):
        InterventionPlan.from_json({"schema_version": 99, "directives": [], "recipe": ""})
