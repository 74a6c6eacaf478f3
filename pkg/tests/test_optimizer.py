import json
import math

import pytest

from combwg.bloch import SolverSettings
from combwg.optimizer import (
    DesignObjective,
    InfeasibleStartError,
    TargetOutsideBandError,
    evaluate_design,
    flat_band_search,
    tune_period,
)

from conftest import quartic_params

COARSE = SolverSettings(cutoffs=(6, 24))


def test_zero_budget_returns_start():
    r = flat_band_search(quartic_params(), budget=0, settings=COARSE)
    assert r.best == quartic_params()
    assert r.evaluations == 0 and r.trace == ()


def test_small_budget_is_rejected():
    with pytest.raises(ValueError):
        flat_band_search(quartic_params(), budget=5, settings=COARSE)


def test_start_outside_bounds_is_infeasible():
    with pytest.raises(InfeasibleStartError):
        flat_band_search(quartic_params(), bounds=((0.4, 0.6), (0.1, 0.9)), settings=COARSE)


def test_start_violating_constraints_is_infeasible():
    obj = DesignObjective(fill_bounds=(0.9, 1.0))
    with pytest.raises(InfeasibleStartError):
        flat_band_search(quartic_params(), objective=obj, settings=COARSE)


def test_unevaluable_design_scores_infinity_with_reason():
    ev = evaluate_design(quartic_params(), DesignObjective(min_feature=0.5), COARSE)
    assert math.isinf(ev.score)
    assert "below minimum feature" in ev.diagnostic
    assert json.loads(ev.to_json())["score"] is None


def test_objective_weights_are_validated():
    with pytest.raises(ValueError):
        DesignObjective(exponent_weight=-1.0)
    with pytest.raises(ValueError):
        DesignObjective(exponent_weight=0.0, mass_weight=0.0)


def test_score_combines_exponent_error_and_mass():
    obj = DesignObjective()
    ev = evaluate_design(quartic_params(), obj, COARSE)
    assert ev.score == pytest.approx(abs(ev.exponent - 4.0) - 0.1 * math.log10(ev.m_eff), rel=1e-12)


def test_search_is_deterministic_and_improves(tmp_path):
    runs = [flat_band_search(quartic_params(), budget=20, settings=COARSE, search_scale=0.5, verify=False) for _ in range(2)]
    a, b = runs
    assert [e.score for e in a.trace] == [e.score for e in b.trace]
    assert a.evaluations <= 20
    assert a.best_evaluation.score <= a.trace[0].score
    path = a.write_trace(tmp_path / "trace.jsonl")
    assert len(path.read_text().splitlines()) == a.evaluations


def test_search_verifies_at_full_cutoffs():
    r = flat_band_search(quartic_params(), budget=20, settings=COARSE, search_scale=0.5, verify=True)
    assert r.final_evaluation is not None
    assert r.final_evaluation.params == r.best
    assert math.isfinite(r.final_evaluation.score)


def test_tune_period_hits_group_index():
    params, ng = tune_period(quartic_params(), 780.0, 50.0, settings=COARSE)
    assert 150.0 < params.a < 400.0
    assert ng == pytest.approx(50.0, rel=5e-2)
    assert params.w / params.a == pytest.approx(0.372)


def test_tune_period_rejects_unreachable_group_index():
    with pytest.raises(TargetOutsideBandError):
        tune_period(quartic_params(), 780.0, 0.5, settings=COARSE)
