import numpy as np
import pytest
from natlas.corpus import UNKNOWN
from natlas.errors import ValidationError
from natlas.harness import fallback_prompts, run_fallback
from natlas.harness.fallback import cascade_plans, write_fallback_report
from natlas.harness.prompts import FALLBACK_PROMPTS
from natlas.model import DirectiveMode, GenerationSettings

SHORT = GenerationSettings(max_tokens=8)


@pytest.fixture(scope="module")
def cascade(planted_decoder, planted_registry, planted_sets):
    prompts = fallback_prompts(planted_registry, seed=5, n=3)
    return run_fallback(planted_decoder, planted_registry, planted_sets, ("pa", "pb", "pc"), prompts, settings=SHORT, concurrency=2)


def test_output_falls_back_in_priority_order(cascade):
    assert cascade.steps == 4
    assert [cascade.top_language(s) for s in range(4)] == ["pa", "pb", "pc", "pd"]
    assert cascade.distribution(2)["pc"] == 1.0
    assert cascade.labels == ("pa", "pb", "pc", "pd", UNKNOWN)


def test_every_step_of_the_full_prompt_set_moves_down_the_chain(planted_decoder, planted_registry, planted_sets):
    prompts = fallback_prompts(planted_registry, seed=5)
    assert len(prompts) == FALLBACK_PROMPTS
    report = run_fallback(planted_decoder, planted_registry, planted_sets, ("pa", "pb", "pc"), prompts, settings=SHORT, concurrency=4)
    for step, expected in enumerate(["pa", "pb", "pc", "pd"]):
        assert report.distribution(step)[expected] >= 0.95


def test_fallback_matrix_rows_are_distributions(cascade, tmp_path):
    matrix = cascade.matrix()
    assert matrix.shape == (4, 5)
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0)
    assert [cascade.step_label(s) for s in range(4)] == ["baseline", "-pa", "-pa,pb", "-pa,pb,pc"]
    assert cascade.recipes[2] == "deactivate:pa(set -1) + deactivate:pb(set -1)"
    written = write_fallback_report(cascade, tmp_path, {})
    assert [p.name for p in written] == ["fallback.json", "fallback.csv", "fallback.svg"]
    assert written[1].read_text().splitlines()[0] == "step,deactivated,pa,pb,pc,pd,unknown"


def test_cascade_plans_deactivate_growing_prefixes(planted_sets):
    plans = cascade_plans(planted_sets, ("pb", "pd"), 0.0, DirectiveMode.MULTIPLY, 800)
    assert [p.recipe for p in plans] == ["baseline", "deactivate:pb(multiply 0)", "deactivate:pb(multiply 0) + deactivate:pd(multiply 0)"]


def test_fallback_rejects_bad_orders(planted_decoder, planted_registry, planted_sets):
    prompts = ["Q: abc? A:"]
    with pytest.raises(ValidationError):
        run_fallback(planted_decoder, planted_registry, planted_sets, ("pa", "pa"), prompts, settings=SHORT)
    with pytest.raises(ValidationError):
        run_fallback(planted_decoder, planted_registry, planted_sets, ("zz",), prompts, settings=SHORT)
    with pytest.raises(ValidationError):
        run_fallback(planted_decoder, planted_registry, planted_sets, ("pa",), [], settings=SHORT)
