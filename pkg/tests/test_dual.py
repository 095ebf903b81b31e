import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import enumerate_optimum, random_instance
from d2d_assign import dual
from d2d_assign.dual import (
    StepSchedule, best_response, best_responses, dual_value, price_update, repair_feasibility,
)
from d2d_assign.mwbm import brute_force, solve_p1

EXAMPLE_U = [[3.0, 5.0], [1.0, 4.0]]


def lagrangian_max_oracle(u, b, lam):
    """max over x (each user at most one association) of the Lagrangian, by enumeration."""
    u = np.asarray(u, float)
    m, n1 = u.shape
    best = -np.inf
    for a in itertools.product(range(-1, n1), repeat=m):
        load = np.zeros(n1 - 1)
        val = 0.0
        for i, j in enumerate(a):
            if j >= 0:
                val += u[i, j]
            if j >= 1:
                load[j - 1] += 1
        best = max(best, val + float(np.dot(lam, np.asarray(b) - load)))
    return best


def test_best_response_examples():
    assert best_response([2.0, 5.0], [4.0]) == 0
    assert best_response([1.0, 3.0, 7.0], [0.0, 0.0]) == 2
    assert best_response([3.0, 3.0], [0.0]) == 0
    assert best_response([1.0, 4.0, 4.0], [0.0, 0.0]) == 1


def test_best_response_rejects_negative_price():
    with pytest.raises(ValueError):
        best_response([1.0, 2.0], [-0.1])


def test_price_update_examples():
    assert price_update(1.0, 5, 3, 0.1) == pytest.approx(1.2)
    assert price_update(0.7, 3, 3, 0.5) == 0.7
    assert price_update(0.1, 0, 3, 0.1) == 0.0
    with pytest.raises(ValueError):
        price_update(0.1, 0, 3, 0.0)


def test_dual_value_examples():
    u = np.array([[1.0, 6.0, 2.0], [4.0, 0.0, 5.0]])
    assert dual_value(u, [1, 1], [0.0, 0.0]) == 11.0
    assert dual_value([[1.0, 4.0]], [1], [2.0]) == 4.0


def test_dual_value_matches_lagrangian_oracle(rng):
    for _ in range(30):
        u, b = random_instance(rng, max_users=4, max_bs=2)
        lam = rng.uniform(0, 10, size=b.shape[0])
        assert dual_value(u, b, lam) == pytest.approx(lagrangian_max_oracle(u, b, lam), abs=1e-9)


def test_weak_duality_on_example():
    for lam in np.linspace(0, 10, 41):
        assert dual_value(EXAMPLE_U, [1], [lam]) >= 7.0


def test_repair_noop_when_feasible():
    u = np.array([[1.0, 5.0], [4.0, 1.0]])
    a = repair_feasibility([1, 0], u, [1])
    assert a.assoc.tolist() == [1, 0]


def test_repair_evicts_lowest_surplus():
    u = np.array([[1.0, 9.0, 3.0], [2.0, 8.0, 1.0], [4.0, 7.0, 5.0]])
    a = repair_feasibility([1, 1, 1], u, [2, 1])
    # user 2 has the lowest surplus on BS1 and moves to BS2 (5 > 4)
    assert a.assoc.tolist() == [1, 1, 2]
    b = repair_feasibility([1, 1, 1], u, [2, 0])
    assert b.assoc.tolist() == [1, 1, 0]


def test_repair_tie_keeps_smaller_index():
    u = np.array([[0.0, 5.0], [0.0, 5.0]])
    assert repair_feasibility([1, 1], u, [1]).assoc.tolist() == [1, 0]


def test_repair_zero_capacity():
    u = np.array([[1.0, 5.0, 6.0], [1.0, 9.0, 2.0]])
    assert repair_feasibility([2, 1], u, [0, 0]).assoc.tolist() == [0, 0]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_repair_properties(seed):
    rng = np.random.default_rng(seed)
    u, b = random_instance(rng, max_users=8)
    lam = rng.uniform(0, 5, size=b.shape[0])
    raw = rng.integers(0, u.shape[1], size=u.shape[0])
    a = repair_feasibility(raw, u, b, lam)
    assert a.is_feasible(b)
    counts = np.bincount(raw, minlength=u.shape[1])[1:]
    for i, j in enumerate(raw):
        if j == 0 or counts[j - 1] <= b[j - 1]:
            assert a.assoc[i] == j


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_best_response_optimal(seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 10, size=(6, 4))
    lam = rng.uniform(0, 5, size=3)
    full = np.concatenate(([0.0], lam))
    for i, j in enumerate(best_responses(u, lam)):
        assert np.all(u[i, j] - full[j] >= u[i] - full)
        assert j == best_response(u[i], lam)


def test_run_slack_constraints():
    u = np.array([[1.0, 5.0, 2.0], [4.0, 1.0, 0.0], [0.0, 2.0, 6.0]])
    res = dual.run(u, [1, 1])
    assert res.iterations == 1
    assert np.all(res.prices == 0)
    assert res.duality_gap == pytest.approx(0.0, abs=1e-12)
    assert res.primal_value == 15.0


def test_run_example_instance():
    res = dual.run(EXAMPLE_U, [1])
    assert res.primal_value == 7.0
    assert res.assignment.is_feasible([1])
    assert res.duality_gap >= -1e-9


def test_run_rejects_nonfinite():
    with pytest.raises(ValueError):
        dual.run([[np.inf, 1.0]], [1])


def test_run_history_and_invariants(rng):
    for _ in range(30):
        u, b = random_instance(rng, max_users=7)
        opt = enumerate_optimum(u, b) if u.shape[0] <= 5 else brute_force(u, b).value
        res = dual.run(u, b, max_iter=300)
        assert res.assignment.is_feasible(b)
        assert res.primal_value <= opt + 1e-9
        assert res.duality_gap >= -1e-9
        best = np.inf
        for rec in res.history:
            assert np.all(rec.prices >= 0)
            assert rec.dual_value >= opt - 1e-9
            best = min(best, rec.dual_value)
        assert best == res.best_dual_value


def test_best_dual_nonincreasing_with_diminishing_steps(rng):
    u, b = random_instance(rng, max_users=8, max_load=1)
    res = dual.run(u, b, StepSchedule("diminishing", 1.0), max_iter=200, stall_window=10**6)
    duals = np.minimum.accumulate([r.dual_value for r in res.history])
    assert np.all(np.diff(duals) <= 0)


def test_constant_schedule():
    s = StepSchedule("constant", 0.5)
    assert s.step(0.5, 1) == s.step(0.5, 100) == 0.5
    d = StepSchedule()
    assert d.initial(np.array([[2.0, 10.0]])) == pytest.approx(1.0)
    assert d.step(1.0, 4) == 0.5
    with pytest.raises(ValueError):
        StepSchedule("adaptive")


def test_history_csv():
    res = dual.run(np.array([[0.0, 5.0], [0.0, 4.0], [1.0, 6.0]]), [1], max_iter=5,
                   stall_window=10**6)
    lines = res.history_csv().strip().splitlines()
    assert lines[0] == "iteration,dual_value,primal_value,load_1,price_1"
    assert len(lines) == 1 + res.iterations
    assert lines[1].split(",")[3] == "3"


def test_dual_close_to_optimum(rng):
    gaps = []
    for _ in range(40):
        u = rng.uniform(0, 5, size=(8, 4))
        b = np.array([1, 2, 1])
        opt = solve_p1(u, b).value
        res = dual.run(u, b)
        gaps.append((opt - res.primal_value) / opt)
    assert np.mean(gaps) < 0.02
