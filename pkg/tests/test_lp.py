"""Bounded-variable simplex checked against scipy's HiGHS as the oracle.

Random problems are drawn fully bounded so the optimal status is never
ambiguous; unboundedness and infeasibility get dedicated hand-built cases.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from drayage.lp import solve_lp


def _random_problem(rng):
    n = int(rng.integers(2, 12))
    me = int(rng.integers(0, 4))
    mu = int(rng.integers(0, 6))
    c = rng.normal(0, 5, n).round(2)
    upper = rng.uniform(0.5, 10, n).round(2)
    # Feasibility by construction: constraints are anchored at a box point.
    # RHS vectors are exact products, so even an overdetermined equality
    # system stays consistent.
    x0 = rng.uniform(0, 1, n) * upper
    A_eq = rng.normal(0, 2, (me, n)).round(2) if me else None
    b_eq = A_eq @ x0 if me else None
    A_ub = rng.normal(0, 2, (mu, n)).round(2) if mu else None
    b_ub = A_ub @ x0 + rng.uniform(0, 2, mu) if mu else None
    return c, A_eq, b_eq, A_ub, b_ub, upper


def test_matches_external_solver_on_random_bounded_problems():
    rng = np.random.default_rng(7)
    optima = 0
    for _ in range(300):
        c, A_eq, b_eq, A_ub, b_ub, upper = _random_problem(rng)
        mine = solve_lp(c, A_eq, b_eq, A_ub, b_ub, upper)
        ref = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=[(0, u) for u in upper],
            method="highs",
        )
        assert mine.status == "optimal"
        assert ref.status == 0
        assert mine.objective == pytest.approx(ref.fun, abs=1e-7, rel=1e-9)
        # The reported point must actually attain the objective and be feasible.
        assert mine.objective == pytest.approx(float(c @ mine.x), abs=1e-9)
        if A_eq is not None:
            assert np.allclose(A_eq @ mine.x, b_eq, atol=1e-7)
        if A_ub is not None:
            assert np.all(A_ub @ mine.x <= b_ub + 1e-7)
        assert np.all(mine.x >= -1e-9)
        assert np.all(mine.x <= upper + 1e-9)
        optima += 1
    assert optima == 300


def test_detects_infeasible_random_problems():
    rng = np.random.default_rng(21)
    found = 0
    for _ in range(200):
        n = int(rng.integers(2, 8))
        c = rng.normal(0, 3, n)
        upper = rng.uniform(0.5, 4, n)
        # Require a sum strictly above the reachable maximum.
        A_eq = np.ones((1, n))
        b_eq = np.array([upper.sum() + 1.0])
        res = solve_lp(c, A_eq, b_eq, None, None, upper)
        assert res.status == "infeasible"
        found += 1
    assert found == 200


def test_detects_unbounded_direction():
    res = solve_lp(
        c=np.array([-1.0, 0.0]),
        A_ub=np.array([[0.0, 1.0]]),
        b_ub=np.array([5.0]),
        upper=np.array([np.inf, np.inf]),
    )
    assert res.status == "unbounded"


def test_pure_box_problem():
    res = solve_lp(
        c=np.array([3.0, -2.0, 0.0]), upper=np.array([4.0, 5.0, np.inf])
    )
    assert res.status == "optimal"
    assert res.x == pytest.approx([0.0, 5.0, 0.0])
    assert res.objective == pytest.approx(-10.0)


def test_known_transportation_optimum():
    # Two supplies of 3 each to one demand of 4, rates 2 and 5: take all of
    # the cheap source first.
    c = np.array([2.0, 5.0])
    A_eq = np.array([[1.0, 1.0]])
    b_eq = np.array([4.0])
    upper = np.array([3.0, 3.0])
    res = solve_lp(c, A_eq, b_eq, None, None, upper)
    assert res.status == "optimal"
    assert res.x == pytest.approx([3.0, 1.0])
    assert res.objective == pytest.approx(11.0)


def test_equality_and_inequality_mix():
    # min x1 + x2  s.t.  x1 + x2 = 2, x1 <= 1.5, x2 <= 1.5, x1 - x2 <= 0.5
    c = np.array([1.0, 1.0])
    res = solve_lp(
        c,
        A_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([2.0]),
        A_ub=np.array([[1.0, -1.0]]),
        b_ub=np.array([0.5]),
        upper=np.array([1.5, 1.5]),
    )
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0)


def test_degenerate_problem_terminates():
    # Many redundant equalities pin the same point; must not cycle.
    n = 4
    c = np.array([1.0, 2.0, 3.0, 4.0])
    A_eq = np.vstack([np.ones(n), np.ones(n), 2 * np.ones(n)])
    b_eq = np.array([2.0, 2.0, 4.0])
    res = solve_lp(c, A_eq, b_eq, None, None, np.full(n, 2.0))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0)


def test_deterministic_vertex():
    rng = np.random.default_rng(3)
    c, A_eq, b_eq, A_ub, b_ub, upper = _random_problem(rng)
    first = solve_lp(c, A_eq, b_eq, A_ub, b_ub, upper)
    second = solve_lp(c, A_eq, b_eq, A_ub, b_ub, upper)
    assert first.status == second.status == "optimal"
    assert np.array_equal(first.x, second.x)
    assert first.objective == second.objective


def test_zero_upper_bound_variable_stays_fixed():
    c = np.array([-5.0, 1.0])
    A_ub = np.array([[1.0, 1.0]])
    b_ub = np.array([3.0])
    upper = np.array([0.0, 10.0])
    res = solve_lp(c, None, None, A_ub, b_ub, upper)
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(0.0, abs=1e-12)
