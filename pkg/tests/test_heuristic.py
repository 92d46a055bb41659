import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from scenfilter.baselines import solve_markowitz
from scenfilter.filter_models import FilterInstance, brute_force_oracle, solve_branch_and_bound
from scenfilter.heuristic import (
    StepInfeasible,
    heuristic_v1,
    heuristic_v2,
    run_heuristic,
    solve_r_mvo,
)
from scenfilter.market_data import ReturnScenarioMatrix, compute_stats
from scenfilter.qp_core import record_solves


def test_r_mvo_full_set_is_markowitz():
    inst = random_instance(0, K=0)
    _, fs = solve_r_mvo(inst.r, range(inst.T), inst.mu0)
    mk = solve_markowitz(compute_stats(inst.r), inst.mu0)
    assert fs.filtered_variance == pytest.approx(mk.objective, rel=1e-8)
    np.testing.assert_allclose(fs.x, mk.v, atol=1e-6)


def test_r_mvo_single_asset():
    r = ReturnScenarioMatrix([[0.1, -0.2, 0.05, 0.3]])
    _, fs = solve_r_mvo(r, [0, 1, 3], -1.0)
    assert fs.x[0] == pytest.approx(1.0)
    assert fs.filtered_variance == pytest.approx(np.var([0.1, -0.2, 0.3]))


def test_r_mvo_identical_scenarios():
    r = ReturnScenarioMatrix([[0.1, 0.1, 0.9], [0.1, 0.1, 0.1]])
    _, fs = solve_r_mvo(r, [0, 1], 0.0)
    assert fs.filtered_variance == pytest.approx(0.0, abs=1e-12)


def test_r_mvo_errors():
    r = ReturnScenarioMatrix([[0.1, 0.2, 0.3]])
    with pytest.raises(ValueError):
        solve_r_mvo(r, [0], 0.0)
    with pytest.raises(StepInfeasible.__mro__[1]):
        solve_r_mvo(r, [0, 1], 0.5)


def test_outlier_steps():
    inst = FilterInstance(ReturnScenarioMatrix([[1, 2, 3, 100]]), 2, 0.0)
    h1, h2 = heuristic_v1(inst), heuristic_v2(inst)
    assert h1.chosen[0] == 3 and h2.chosen[0] == 3
    # {1,3} and {2,3} (0-based {0,2}) tie for the second removal; v2 takes the smaller index
    assert h2.chosen == [3, 0]
    assert h1.objective == pytest.approx(0.25)
    assert h2.objective == pytest.approx(0.25)


def test_k1_optimal():
    inst = random_instance(1, K=1)
    exact = solve_branch_and_bound(inst).objective
    assert heuristic_v1(inst).objective == pytest.approx(exact, rel=1e-8)
    assert heuristic_v2(inst).objective == pytest.approx(exact, rel=1e-8)
    assert brute_force_oracle(inst).objective == pytest.approx(heuristic_v2(inst).objective,
                                                               abs=0)


def test_sweep_size():
    inst = random_instance(2, K=3)
    trace = heuristic_v2(inst)
    assert [s.n_solves for s in trace.steps] == [inst.T, inst.T - 1, inst.T - 2]
    with record_solves() as log:
        heuristic_v2(inst)
    assert len(log) == 3 * inst.T - 3


@settings(max_examples=8)
@given(st.integers(0, 10 ** 6))
def test_nested_and_versions_agree(seed):
    inst = random_instance(seed, n=4, T=9, K=3)
    h1, h2 = heuristic_v1(inst), heuristic_v2(inst)
    for trace in (h1, h2):
        assert len(set(trace.chosen)) == 3
        assert all(np.isfinite(s.objective) for s in trace.steps)
        assert trace.solution.filtered == sorted(trace.chosen)
        for a, b in zip(trace.steps, trace.steps[1:]):
            assert set(a.solution.filtered) < set(b.solution.filtered)
    for a, b in zip(h1.steps, h2.steps):
        assert a.objective == pytest.approx(b.objective, rel=1e-8, abs=1e-14)
    assert h2.objective >= brute_force_oracle(inst).objective - 1e-12


def test_step_infeasible():
    r = ReturnScenarioMatrix([[0.1, 0.2, 0.1, 0.0], [0.0, 0.1, 0.1, 0.2]])
    inst = FilterInstance(r, 2, 0.5)
    for run in (heuristic_v1, heuristic_v2):
        with pytest.raises(StepInfeasible) as exc:
            run(inst)
        assert exc.value.step == 1


def test_auto_and_json():
    inst = random_instance(3, K=2)
    trace = run_heuristic(inst)
    assert trace.version == "v1"
    doc = json.loads(trace.to_json())
    assert len(doc["steps"]) == 2 and doc["filtered"] == sorted(trace.chosen)
    with pytest.raises(ValueError):
        run_heuristic(inst, "v3")
    with pytest.raises(ValueError):
        heuristic_v2(inst.with_K(0))
