"""Occupation-measure linear program and the constrained-problem pipeline."""
from dataclasses import dataclass, field

import numpy as np

from .bellman import compute_vstar, evaluate_strategy
from .errors import InfeasibleProblem, TrivialProblem, UnboundedProblem, ValidationError
from .model import GradualImpulsiveModel, StationaryPolicy
from .reduction import lift_stationary_policy, reduce_model
from .simplex import solve_lp


@dataclass(frozen=True, eq=False)
class OccupationLP:
    """Variables nu(x, a) for x in R and admissible a; one balance row per x in R.

    ``columns[k] = (x, a)`` and ``rows[r] = x`` give the index maps.
    """

    columns: tuple
    rows: tuple
    c: np.ndarray          # objective coefficients
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray       # one row per constrained cost
    b_ub: np.ndarray
    x0: int
    n_states: int
    n_actions: int

    def column_index(self, x, a):
        return self.columns.index((x, a))


@dataclass
class LPSolution:
    status: str
    nu: np.ndarray = None           # aligned with lp.columns
    objective: float = None
    balance_residual: float = None
    slacks: np.ndarray = None
    basis: tuple = ()
    duals: np.ndarray = None
    certificate: np.ndarray = None
    iterations: int = 0
    lp: OccupationLP = None

    def table(self):
        """nu as a dense (states, actions) array, zero outside R."""
        out = np.zeros((self.lp.n_states, self.lp.n_actions))
        if self.nu is not None:
            for k, (x, a) in enumerate(self.lp.columns):
                out[x, a] = self.nu[k]
        return out


def _standard(m):
    return reduce_model(m) if isinstance(m, GradualImpulsiveModel) else m


def build_occupation_lp(m, R, x0=None, d=None):
    """Occupation LP restricted to the states R (inflows from outside R are dropped)."""
    mgo = _standard(m)
    x0 = mgo.x0 if x0 is None else mgo.state_index(x0)
    d = mgo.bounds if d is None else np.asarray(d, dtype=float)
    if d.shape != (mgo.cost_count - 1,):
        raise ValidationError("bounds do not match the number of constrained costs")
    R = tuple(sorted(int(x) for x in R))
    if x0 not in R:
        raise TrivialProblem(f"initial state {mgo.states[x0]} is outside R")
    cols = tuple((x, a) for x in R for a in range(mgo.n_actions) if mgo.admissible[x, a])
    row_of = {x: r for r, x in enumerate(R)}
    rates, qt = mgo.rates, mgo.qtilde
    A_eq = np.zeros((len(R), len(cols)))
    for k, (y, a) in enumerate(cols):
        A_eq[row_of[y], k] += rates[y, a]
        for x in R:
            if qt[y, a, x] != 0:
                A_eq[row_of[x], k] -= qt[y, a, x]
    b_eq = np.array([1.0 if x == x0 else 0.0 for x in R])
    C = np.array([[mgo.c[i, x, a] for (x, a) in cols] for i in range(mgo.cost_count)])
    C = C.reshape(mgo.cost_count, len(cols))
    return OccupationLP(cols, R, C[0], A_eq, b_eq, C[1:], d.copy(), x0,
                        mgo.n_states, mgo.n_actions)


def solve_simplex(lp):
    res = solve_lp(lp.c, lp.A_eq, lp.b_eq, lp.A_ub, lp.b_ub)
    status = {"optimal": "Optimal", "infeasible": "Infeasible", "unbounded": "Unbounded"}[res.status]
    if status != "Optimal":
        return LPSolution(status, certificate=res.certificate, iterations=res.iterations, lp=lp)
    nu = res.x
    resid = float(np.max(np.abs(lp.A_eq @ nu - lp.b_eq), initial=0.0))
    slacks = lp.b_ub - lp.A_ub @ nu
    names = []
    for j in res.basis:
        if j < len(lp.columns):
            names.append(("nu", *lp.columns[j]))
        else:
            names.append(("slack", j - len(lp.columns) + 1))
    return LPSolution(status, nu, res.objective, resid, slacks, tuple(names),
                      res.duals, None, res.iterations, lp)


def extract_policy(sol, bellman, mgo, zero_tol=1e-12):
    """Stationary policy from an optimal occupation measure; f* where nu vanishes.

    Entries at most ``zero_tol`` times the largest entry (or 1) are simplex round-off
    and count as zero: normalized, they could put states on near-zero exit rates.
    """
    if sol.status != "Optimal":
        raise ValidationError("policy extraction needs an optimal solution")
    tab = sol.table()
    tab = np.where(tab > zero_tol * max(1.0, float(tab.max(initial=0.0))), tab, 0.0)
    probs = np.zeros((mgo.n_states, mgo.n_actions))
    for x in range(mgo.n_states):
        tot = tab[x].sum()
        if x in sol.lp.rows and tot > 0:
            probs[x] = tab[x] / tot
        else:
            probs[x, bellman.f_star[x]] = 1.0
    return StationaryPolicy(probs)


@dataclass
class ConstrainedSolution:
    value: float
    strategy: object
    solution: LPSolution
    bellman: object
    policy: StationaryPolicy
    check: dict = field(default_factory=dict)
    trivial: bool = False

    def __iter__(self):
        return iter((self.value, self.strategy, self.solution, self.bellman))


def solve_constrained_problem(m, epsilon=1.0, tol=1e-10, check_tol=1e-7, lift_opts=None):
    """Reduce, compute v*, solve the occupation LP, extract and lift the optimal
    policy, then re-evaluate the strategy in the original model."""
    mgo = reduce_model(m)
    bell = compute_vstar(mgo, epsilon=epsilon, tol=tol)
    try:
        lp = build_occupation_lp(mgo, bell.R, mgo.x0, mgo.bounds)
    except TrivialProblem:
        if np.any(mgo.bounds < 0):
            raise InfeasibleProblem("a negative bound cannot be met by nonnegative costs") from None
        probs = np.zeros((mgo.n_states, mgo.n_actions))
        probs[np.arange(mgo.n_states), bell.f_star] = 1.0
        policy = StationaryPolicy(probs)
        strat = lift_stationary_policy(policy, m, lift_opts)
        ev = evaluate_strategy(m, strat)
        check = _check(ev.W, 0.0, mgo.bounds, check_tol)
        return ConstrainedSolution(0.0, strat, None, bell, policy, check, trivial=True)
    sol = solve_simplex(lp)
    if sol.status == "Infeasible":
        raise InfeasibleProblem("the occupation LP is infeasible", sol)
    if sol.status == "Unbounded":
        raise UnboundedProblem("the occupation LP is unbounded", sol)
    policy = extract_policy(sol, bell, mgo)
    strat = lift_stationary_policy(policy, m, lift_opts)
    ev = evaluate_strategy(m, strat)
    check = _check(ev.W, sol.objective, mgo.bounds, check_tol)
    return ConstrainedSolution(sol.objective, strat, sol, bell, policy, check)


def _check(W, value, bounds, tol):
    W = np.asarray(W, dtype=float)
    objective_ok = bool(abs(W[0] - value) <= tol)
    bounds_ok = bool(np.all(W[1:] <= bounds + tol))
    return {
        "W": W.tolist(),
        "objective_matches": objective_ok,
        "constraints_hold": bounds_ok,
        "pass": objective_ok and bounds_ok,
        "tol": tol,
    }
