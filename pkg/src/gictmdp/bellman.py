"""Value function v*, greedy selector f*, and exact total-cost evaluation.

Total expected costs are minimal nonnegative solutions of w = g + P w, where P is
the (sub-stochastic) jump matrix and g the expected cost per sojourn. States are
first classified on the transition graph:

* infinite: can reach a state with infinite sojourn cost, or a closed recurrent
  class that never leaks and carries positive cost;
* zero: cannot reach any positive cost;
* the rest are transient with respect to the positive-cost region, and w solves a
  nonsingular linear system there.

Monotone iteration from 0 is kept as an alternative method and cross-check.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .dynamics import gi_jump_law, go_jump_law, mix_laws, poisson_jump_law, pseudo_jump_law
from .errors import Unconverged, ValidationError, ZenoDetected
from .model import (
    MarkovPolicy,
    StationaryPolicy,
    StationaryStrategy,
    check_policy,
    check_schedule,
    check_strategy,
)
from .poisson import PoissonStrategy, PseudoPoissonPolicy

DIVERGENCE_CAP = 1e12
EXIT_TOL = 1e-12     # class exit mass at or below this is rounding, not leakage
ZENO_RADIUS = 1.0 - 1e-9


@dataclass
class BellmanResult:
    v: np.ndarray
    f_star: np.ndarray
    R: tuple
    iterations: int
    residual: float
    epsilon: float
    zero_set: tuple = ()
    iterates: list = None
    diagnostics: dict = field(default_factory=dict)

    def in_R(self, x):
        return x in self.R


@dataclass
class EvaluationResult:
    W: np.ndarray
    w: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    trunc_error: float = 0.0
    laws: list = None


# ---------------------------------------------------------------- graph helpers

def reachability(adj):
    """reach[x, y] is True when y can be reached from x in zero or more steps."""
    n = adj.shape[0]
    reach = adj.astype(bool) | np.eye(n, dtype=bool)
    while True:
        nxt = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def closed_classes(P, absorb, tol=EXIT_TOL):
    """Mask of states in strongly connected classes that cannot be left, and the
    class labels.

    A class counts as closed when every member sends at most ``tol`` of its mass
    outside the class or to the cemetery.
    """
    n = P.shape[0]
    ncomp, labels = connected_components((P > 0).astype(np.int8), directed=True,
                                         connection="strong")
    out = np.zeros(n, dtype=bool)
    for c in range(ncomp):
        members = labels == c
        exit_mass = P[members][:, ~members].sum(axis=1) + absorb[members]
        if np.all(exit_mass <= tol):
            out |= members
    return out, labels


def _safe_matvec(P, w):
    """P @ w with 0 * inf = 0."""
    inf = np.isinf(w)
    out = P @ np.where(inf, 0.0, w)
    if inf.any():
        hit = (P[:, inf] > 0).any(axis=1)
        out = np.where(hit, np.inf, out)
    return out


def total_cost(P, absorb, g):
    """Minimal nonnegative solution of w = g + P w for one cost vector ``g``.

    ``absorb[x] > 0`` marks rows that leak to the cemetery; missing row mass from
    truncated series is not leakage.
    """
    n = g.size
    P = np.asarray(P, dtype=float)
    absorb = np.asarray(absorb, dtype=float)
    g = np.asarray(g, dtype=float)
    recurrent, labels = closed_classes(P, absorb)
    # exits from closed classes are rounding residue; cut them
    P = np.where(recurrent[:, None] & (labels[:, None] != labels[None, :]), 0.0, P)
    reach = reachability(P > 0)
    bad = np.isinf(g) | (recurrent & (g > 0))
    w = np.zeros(n)
    inf = reach[:, bad].any(axis=1) if bad.any() else np.zeros(n, bool)
    positive = reach[:, g > 0].any(axis=1) if (g > 0).any() else np.zeros(n, bool)
    T = positive & ~inf & ~recurrent
    w[inf] = np.inf
    if T.any():
        A = np.eye(int(T.sum())) - P[np.ix_(T, T)]
        w[T] = np.maximum(np.linalg.solve(A, g[T]), 0.0)
        w[T] = np.where(w[T] > DIVERGENCE_CAP, np.inf, w[T])
    return w


def iterate_total_cost(P, g, tol=1e-12, max_iter=1_000_000, cap=DIVERGENCE_CAP):
    """Monotone iterates w_k = sum_{i<k} P^i g from 0, taken at k = 1, 2, 4, ...

    Doubling (w_2k = w_k + P^k w_k) visits a subsequence of the plain iteration, so
    the limit is the same minimal solution, and linearly divergent states reach
    ``cap`` (reported as inf) in a few dozen steps. ``max_iter`` bounds the number
    of doublings. Returns (w, k).
    """
    g = np.asarray(g, dtype=float)
    w = np.where(g > cap, np.inf, g)
    A = np.asarray(P, dtype=float)
    k = 1
    for _ in range(int(max_iter)):
        new = w + _safe_matvec(A, w)
        new = np.where(new > cap, np.inf, new)
        fin = np.isfinite(new) & np.isfinite(w)
        step = np.max(np.abs(new[fin] - w[fin]), initial=0.0)
        settled = np.array_equal(np.isinf(new), np.isinf(w))
        w = new
        k *= 2
        A = A @ A
        if step < tol and settled:
            return w, k
    raise Unconverged(f"monotone iteration did not converge in {max_iter} doublings", partial=w)


def _solve_laws(laws, x0, method, tol, max_iter):
    n = len(laws)
    P = np.array([law.next for law in laws])
    absorb = np.array([law.absorb for law in laws])
    G = np.array([law.sojourn_cost for law in laws]).T   # (J+1, n)
    if method == "direct":
        w = np.array([total_cost(P, absorb, g) for g in G])
        iters = 0
    elif method == "iterate":
        res = [iterate_total_cost(P, g, tol, max_iter) for g in G]
        w = np.array([r[0] for r in res])
        iters = max(r[1] for r in res)
    else:
        raise ValueError(f"unknown method {method!r}")
    trunc = float(sum(law.trunc_error for law in laws))
    diag = {"method": method, "iterations": iters, "states": n}
    return w, P, absorb, G, trunc, diag


def _backward(epoch_laws, w_tail):
    """Costs-to-go through explicit epochs, last epoch first."""
    w = w_tail
    trunc = 0.0
    for laws in reversed(epoch_laws):
        P = np.array([law.next for law in laws])
        G = np.array([law.sojourn_cost for law in laws]).T
        w = np.array([gi + _safe_matvec(P, wi) for gi, wi in zip(G, w)])
        trunc += sum(law.trunc_error for law in laws)
    return w, trunc


def _result(w, x0, trunc, diag, laws):
    return EvaluationResult(W=w[:, x0].copy(), w=w, diagnostics=diag, trunc_error=trunc, laws=laws)


def evaluate_policy(mgo, pol, x0=None, tol=1e-12, max_iter=1_000_000, method="direct",
                    series_tol=1e-12):
    """Total expected costs of a stationary, Markov or pseudo-Poisson policy of the
    standard model. ``method`` is "direct" (graph classification plus linear solve)
    or "iterate" (monotone iteration from zero)."""
    x0 = mgo.x0 if x0 is None else mgo.state_index(x0)
    n = mgo.n_states
    if isinstance(pol, StationaryPolicy):
        check_policy(mgo, pol)
        laws = [go_jump_law(mgo, x, pol.probs[x]) for x in range(n)]
        w, *_, trunc, diag = _solve_laws(laws, x0, method, tol, max_iter)
        return _result(w, x0, trunc, diag, laws)
    if isinstance(pol, MarkovPolicy):
        def law(sched, x):
            check_schedule(mgo, sched, x)
            return go_jump_law(mgo, x, sched)
        tail = [law(pol.tail[x], x) for x in range(n)]
        epochs = [[law(e[x], x) for x in range(n)] for e in pol.epochs]
    elif isinstance(pol, PseudoPoissonPolicy):
        def law(series, x):
            return pseudo_jump_law(mgo, series, x, pol.lam, series_tol)
        tail = [law(pol.tail[x], x) for x in range(n)]
        epochs = [[law(e[x], x) for x in range(n)] for e in pol.epochs]
    else:
        raise ValidationError(f"unsupported policy type {type(pol).__name__}")
    w_tail, *_, trunc, diag = _solve_laws(tail, x0, method, tol, max_iter)
    w, trunc_epochs = _backward(epochs, w_tail)
    diag["epochs"] = len(epochs)
    return _result(w, x0, trunc + trunc_epochs, diag, epochs + [tail])


def check_zeno(imm, imm_cost, states=None):
    """Raise ZenoDetected when immediate impulses can cycle with positive cost.

    ``imm[x, y]`` is the probability of an immediate impulse from x landing in y and
    ``imm_cost[i, x]`` its expected lump cost.
    """
    adj = imm > 0
    ncomp, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        block = imm[np.ix_(members, members)]
        if not block.any():
            continue
        radius = float(np.max(np.abs(np.linalg.eigvals(block))))
        if radius >= ZENO_RADIUS and (imm_cost[:, members] > 0).any():
            names = [states[i] if states else i for i in members]
            raise ZenoDetected(f"immediate impulses cycle through states {names} "
                               f"(spectral radius {radius:.12g})", names)
    return True


def stationary_strategy_laws(m, s):
    laws = []
    for x in range(m.n_states):
        parts = []
        if s.w_imp[x] > 0:
            parts.append((s.w_imp[x], gi_jump_law(m, x, 0.0, s.beta[x], s.f_hat[x])))
        if s.w_imp[x] < 1:
            parts.append((1.0 - s.w_imp[x], gi_jump_law(m, x, math.inf, s.beta[x], s.f_hat[x])))
        laws.append(mix_laws(parts))
    return laws


def evaluate_strategy(m, s, x0=None, tol=1e-12, max_iter=1_000_000, method="direct",
                      series_tol=1e-12):
    """Total expected costs of a stationary or Poisson-related strategy of the
    gradual-impulsive model."""
    x0 = m.x0 if x0 is None else m.state_index(x0)
    n = m.n_states
    if isinstance(s, StationaryStrategy):
        check_strategy(m, s)
        imm = _immediate(m, s.w_imp, s.beta)
        imm_cost = s.w_imp[None, :] * np.einsum("ixb,xb->ix", m.cI, s.beta)
        check_zeno(imm, imm_cost, m.states)
        laws = stationary_strategy_laws(m, s)
        w, *_, trunc, diag = _solve_laws(laws, x0, method, tol, max_iter)
        return _result(w, x0, trunc, diag, laws)
    if isinstance(s, PoissonStrategy):
        def law(k, x):
            return poisson_jump_law(m, k.grad, k.cont, k.imp, x, s.lam, series_tol)
        g0 = np.array([1.0 - float(s.tail[x].cont.at(0)) for x in range(n)])
        b0 = np.array([s.tail[x].imp.at(0) for x in range(n)]).reshape(n, m.n_impulse)
        imm = _immediate(m, g0, b0)
        check_zeno(imm, g0[None, :] * np.einsum("ixb,xb->ix", m.cI, b0), m.states)
        tail = [law(s.tail[x], x) for x in range(n)]
        epochs = [[law(e[x], x) for x in range(n)] for e in s.epochs]
        w_tail, *_, trunc, diag = _solve_laws(tail, x0, method, tol, max_iter)
        w, trunc_epochs = _backward(epochs, w_tail)
        diag["epochs"] = len(epochs)
        return _result(w, x0, trunc + trunc_epochs, diag, epochs + [tail])
    raise ValidationError(f"unsupported strategy type {type(s).__name__}")


def _immediate(m, weight, beta):
    n = m.n_states
    if m.n_impulse == 0:
        return np.zeros((n, n))
    return weight[:, None] * np.einsum("xb,xby->xy", beta, m.Q)


# ---------------------------------------------------------------- v*

def zero_cost_set(succ, cost, adm):
    """Largest set Z where every state has an admissible zero-cost action whose
    successors all stay in Z. ``succ[x, a]`` is a boolean successor mask."""
    n = cost.shape[0]
    Z = np.ones(n, dtype=bool)
    ok = adm & (cost == 0)
    while True:
        stays = ~(succ & ~Z[None, None, :]).any(axis=2)
        newZ = Z & (ok & stays).any(axis=1)
        if np.array_equal(newZ, Z):
            return Z
        Z = newZ


def finite_value_set(succ, rates, cost, adm, Z):
    """States that can reach Z almost surely without an action that stays forever at
    positive cost."""
    n = cost.shape[0]
    usable = adm & ~((rates == 0) & (cost > 0))
    W = np.ones(n, dtype=bool)
    while True:
        allowed = usable & ~(succ & ~W[None, None, :]).any(axis=2)
        # positive-probability reachability of Z inside W using allowed actions
        reach = Z & W
        while True:
            step = W & ~reach & (allowed & (succ & reach[None, None, :]).any(axis=2)).any(axis=1)
            if not step.any():
                break
            reach = reach | step
        if np.array_equal(reach, W):
            return W
        W = reach


def _bellman_rhs(v, cost, rates, qt, eps, usable):
    """Bellman right-hand side for every (x, a); inf where the action is not usable."""
    inner = cost + np.einsum("xay,y->xa", qt, v) + eps * v[:, None]
    rhs = inner / (eps + rates)
    return np.where(usable, rhs, np.inf)


def compute_vstar(mgo, epsilon=1.0, tol=1e-10, max_iter=1_000_000, record=False,
                  cap=DIVERGENCE_CAP):
    """Minimal nonnegative solution of the aggregate-cost Bellman equation.

    Value iteration from 0 runs on the states of finite value; those are found
    beforehand on the transition graph, and the rest get v = inf. R collects the
    states with v above a relative threshold, and f* is the lowest-index
    minimizer (states of the zero-cost set use a zero-cost action staying there).
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    n = mgo.n_states
    cost = mgo.c.sum(axis=0)
    rates = mgo.rates
    qt = mgo.qtilde
    adm = mgo.admissible
    succ = qt > 0
    Z = zero_cost_set(succ, cost, adm)
    F = finite_value_set(succ, rates, cost, adm, Z)
    usable = adm & ~(succ & ~F[None, None, :]).any(axis=2) & ~((rates == 0) & (cost > 0))
    usable &= F[:, None]
    v = np.zeros(n)
    iterates = [v.copy()] if record else None
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        rhs = _bellman_rhs(v, cost, rates, qt, epsilon, usable)
        new = np.where(F, rhs.min(axis=1), 0.0)
        residual = float(np.max(np.abs(new - v), initial=0.0))
        v = new
        if record:
            iterates.append(v.copy())
        if residual < tol or np.any(v > cap):
            break
    else:
        partial = BellmanResult(np.where(F, v, np.inf), np.zeros(n, int), (), it, residual, epsilon)
        raise Unconverged(f"value iteration did not converge in {max_iter} steps", partial)
    v = np.where(v > cap, np.inf, v)
    v = np.where(F, v, np.inf)
    rhs = _bellman_rhs(np.where(np.isfinite(v), v, 0.0), cost, rates, qt, epsilon, usable)
    f_star = np.zeros(n, dtype=int)
    for x in range(n):
        if Z[x]:
            keep = adm[x] & (cost[x] == 0) & ~(succ[x] & ~Z[None, :]).any(axis=1)
            f_star[x] = int(np.flatnonzero(keep)[0])
        elif np.isfinite(v[x]):
            best = rhs[x].min()
            f_star[x] = int(np.flatnonzero(rhs[x] <= best + 1e-12 * (1.0 + abs(best)))[0])
        else:
            f_star[x] = int(np.flatnonzero(adm[x])[0])
    finite = v[np.isfinite(v)]
    theta = 1e-9 * (1.0 + (finite.max() if finite.size else 0.0))
    R = tuple(int(x) for x in np.flatnonzero(v > theta))
    diag = {
        "finite_set": tuple(int(x) for x in np.flatnonzero(F)),
        "theta_R": theta,
        "R_matches_zero_set": set(R) == set(np.flatnonzero(~Z).tolist()),
    }
    return BellmanResult(v, f_star, R, it, residual, float(epsilon),
                         tuple(int(x) for x in np.flatnonzero(Z)), iterates, diag)


def bellman_residuals(mgo, res):
    """Per-state Bellman right-hand side at f* (finite states) minus v."""
    cost = mgo.c.sum(axis=0)
    v = np.where(np.isfinite(res.v), res.v, 0.0)
    rhs = _bellman_rhs(v, cost, mgo.rates, mgo.qtilde, res.epsilon, mgo.admissible)
    at_f = rhs[np.arange(mgo.n_states), res.f_star]
    return at_f, np.abs(at_f - v)
