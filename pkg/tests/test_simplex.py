import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from gictmdp.simplex import solve_lp


def _random_lp(rng):
    n = int(rng.integers(2, 9))
    me, mu = int(rng.integers(0, 4)), int(rng.integers(0, 4))
    x_feas = rng.uniform(0, 2, n) * (rng.random(n) < 0.7)
    A_eq = rng.normal(size=(me, n))
    A_ub = rng.normal(size=(mu, n))
    b_eq = A_eq @ x_feas
    b_ub = A_ub @ x_feas + rng.uniform(0, 1, mu)
    c = rng.normal(size=n)
    return c, A_eq, b_eq, A_ub, b_ub


def _check_duals(res, c, A_eq, b_eq, A_ub, b_ub, tol=1e-7):
    me = A_eq.shape[0]
    y_eq, y_ub = res.duals[:me], res.duals[me:]
    reduced = c - A_eq.T @ y_eq - A_ub.T @ y_ub
    assert np.all(reduced >= -tol)
    assert np.all(y_ub <= tol)
    assert b_eq @ y_eq + b_ub @ y_ub == pytest.approx(res.objective, abs=tol * (1 + abs(res.objective)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_highs(seed):
    rng = np.random.default_rng(seed)
    c, A_eq, b_eq, A_ub, b_ub = _random_lp(rng)
    # presolve may report an unbounded problem as infeasible; these are feasible
    ref = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A_eq if len(b_eq) else None, b_eq=b_eq if len(b_eq) else None,
                  bounds=(0, None), method="highs", options={"presolve": False})
    res = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    if ref.status == 3:
        assert res.status == "unbounded"
        d = res.certificate
        assert np.all(d >= -1e-12) and c @ d < 0
        assert np.allclose(A_eq @ d, 0, atol=1e-9) and np.all(A_ub @ d <= 1e-9)
        return
    assert ref.status == 0
    assert res.status == "optimal"
    assert res.objective == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
    assert np.all(res.x >= 0)
    assert np.allclose(A_eq @ res.x, b_eq, atol=1e-8)
    assert np.all(A_ub @ res.x <= b_ub + 1e-8)
    _check_duals(res, c, A_eq, b_eq, A_ub, b_ub)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_infeasible_certificate(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    a = rng.uniform(0.5, 2, n)
    # a.x = 1 and a.x <= -1 - u cannot both hold
    A_eq = a[None, :]
    A_ub = np.vstack([a, rng.normal(size=n)])
    b_eq = np.array([1.0])
    b_ub = np.array([-1.0 - rng.random(), 5.0])
    res = solve_lp(rng.normal(size=n), A_eq, b_eq, A_ub, b_ub)
    assert res.status == "infeasible"
    y = res.certificate
    y_eq, y_ub = y[:1], y[1:]
    # Farkas: y.[A_eq; A_ub] <= 0 on x, y_ub <= 0 on slacks, and y.b > 0
    assert np.all(y_eq @ A_eq + y_ub @ A_ub <= 1e-9)
    assert np.all(y_ub <= 1e-9)
    assert y_eq @ b_eq + y_ub @ b_ub > 1e-9


def test_beale_cycling_example():
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A_ub = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b_ub = np.array([0.0, 0.0, 1.0])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-0.05, abs=1e-12)
    assert np.allclose(res.x, [0.04, 0, 1, 0], atol=1e-12)


def test_redundant_equality_rows():
    A_eq = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    b_eq = np.array([1.0, 2.0, 1.0])
    res = solve_lp([1.0, 2.0, 0.5], A_eq, b_eq)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.5)
    assert np.allclose(A_eq @ res.x, b_eq)


def test_no_constraints():
    assert solve_lp([1.0, 0.0]).objective == 0.0
    assert solve_lp([1.0, -1.0]).status == "unbounded"


def test_deterministic():
    rng = np.random.default_rng(4)
    c, A_eq, b_eq, A_ub, b_ub = _random_lp(rng)
    a = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    b = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    assert a.basis == b.basis and np.array_equal(a.x, b.x) and a.iterations == b.iterations
