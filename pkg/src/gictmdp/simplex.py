"""Dense two-phase revised simplex with Bland's rule.

Solves   min c.x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.

The basis inverse is kept explicitly and updated by elementary row operations,
with a fresh inverse every ``REFACTOR`` pivots. Entering and leaving variables are
chosen by Bland's rule (smallest index), which rules out cycling, so pivoting is
fully deterministic.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

OPT_TOL = 1e-10      # reduced-cost tolerance
PIV_TOL = 1e-11      # smallest acceptable pivot
FEAS_TOL = 1e-9      # phase-1 objective accepted as zero (relative to 1 + |b|)
REFACTOR = 50
MAX_SMALL_PIVOTS = 20


@dataclass
class SimplexResult:
    status: str                 # "optimal", "infeasible", "unbounded"
    x: np.ndarray = None
    objective: float = None
    basis: list = None          # indices into the structural + slack columns
    duals: np.ndarray = None    # one per original row (equalities first)
    certificate: np.ndarray = None
    iterations: int = 0


class _Tableau:
    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.refactor()
        self.pivots = 0
        self.small = 0

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis", {"basis": list(self.basis)}) from exc

    def xB(self):
        return self.Binv @ self.b

    def pivot(self, r, j, u):
        pr = u[r]
        if abs(pr) < PIV_TOL:
            self.small += 1
            if self.small > MAX_SMALL_PIVOTS:
                raise NumericalFailure("repeated pivots below tolerance",
                                       {"pivot": float(pr), "row": r, "column": j})
        else:
            self.small = 0
        row = self.Binv[r] / pr
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        self.basis[r] = j
        self.pivots += 1
        if self.pivots % REFACTOR == 0:
            self.refactor()


def _run(tab, cost, allowed, max_iter):
    """Bland-rule primal simplex on the current feasible basis.

    Returns ("optimal", None) or ("unbounded", (j, u)).
    """
    ncol = tab.A.shape[1]
    for _ in range(max_iter):
        y = cost[tab.basis] @ tab.Binv
        d = cost - y @ tab.A
        d[tab.basis] = 0.0
        cand = np.flatnonzero((d < -OPT_TOL) & allowed)
        if cand.size == 0:
            return "optimal", None
        j = int(cand[0])
        u = tab.Binv @ tab.A[:, j]
        xB = np.maximum(tab.xB(), 0.0)
        rows = np.flatnonzero(u > PIV_TOL)
        if rows.size == 0:
            return "unbounded", (j, u)
        ratios = xB[rows] / u[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        # Bland: among tied rows leave the variable with the smallest index
        r = int(min(ties, key=lambda i: tab.basis[i]))
        tab.pivot(r, j, u)
    raise NumericalFailure("simplex iteration limit reached", {"max_iter": max_iter, "ncol": ncol})


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, max_iter=50_000):
    c = np.asarray(c, dtype=float)
    nx = c.size
    A_eq = np.zeros((0, nx)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nx)
    A_ub = np.zeros((0, nx)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nx)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    me, mu = A_eq.shape[0], A_ub.shape[0]
    m = me + mu
    ns = nx + mu
    # standard form with slacks, rows flipped to make b >= 0
    A = np.zeros((m, ns))
    A[:me, :nx] = A_eq
    A[me:, :nx] = A_ub
    A[me:, nx:] = np.eye(mu)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    if m == 0:
        if np.any(c < -OPT_TOL):
            ray = np.zeros(nx)
            ray[int(np.flatnonzero(c < -OPT_TOL)[0])] = 1.0
            return SimplexResult("unbounded", certificate=ray)
        return SimplexResult("optimal", np.zeros(nx), 0.0, [], np.zeros(0))

    # phase 1: artificial identity columns
    A1 = np.hstack([A, np.eye(m)])
    cost1 = np.concatenate([np.zeros(ns), np.ones(m)])
    tab = _Tableau(A1, b, range(ns, ns + m))
    allowed = np.ones(ns + m, dtype=bool)
    status, _ = _run(tab, cost1, allowed, max_iter)
    it1 = tab.pivots
    xB = tab.xB()
    phase1 = float(cost1[tab.basis] @ xB)
    if phase1 > FEAS_TOL * (1.0 + np.abs(b).max()):
        y = cost1[tab.basis] @ tab.Binv
        # y.A <= 0 and y.b > 0 for the sign-normalized rows; undo the flips
        return SimplexResult("infeasible", certificate=y * sign, iterations=it1,
                             objective=phase1)

    # drive artificials out of the basis; drop rows that are redundant
    keep_rows = list(range(m))
    r = 0
    while r < len(tab.basis):
        j_b = tab.basis[r]
        if j_b < ns:
            r += 1
            continue
        row = tab.Binv[r] @ tab.A[:, :ns]
        nonbasic = [j for j in range(ns) if j not in tab.basis]
        cand = [j for j in nonbasic if abs(row[j]) > 1e-9]
        if cand:
            j = cand[0]
            tab.pivot(r, j, tab.Binv @ tab.A[:, j])
            r += 1
        else:
            # redundant row: remove it
            drop = r
            keep_rows.pop(drop)
            basis = tab.basis[:drop] + tab.basis[drop + 1:]
            A_new = np.delete(tab.A, drop, axis=0)
            b_new = np.delete(tab.b, drop)
            tab = _Tableau(A_new, b_new, basis)
    A2 = tab.A[:, :ns]
    tab2 = _Tableau(A2, tab.b, tab.basis)
    cost2 = np.concatenate([c, np.zeros(mu)])
    status, ray = _run(tab2, cost2, np.ones(ns, dtype=bool), max_iter)
    iters = it1 + tab2.pivots
    if status == "unbounded":
        j, u = ray
        direction = np.zeros(ns)
        direction[j] = 1.0
        direction[tab2.basis] = -u
        return SimplexResult("unbounded", certificate=direction[:nx], iterations=iters,
                             basis=list(tab2.basis))
    xs = np.zeros(ns)
    xs[tab2.basis] = np.maximum(tab2.xB(), 0.0)
    y_kept = cost2[tab2.basis] @ tab2.Binv
    duals = np.zeros(m)
    duals[keep_rows] = y_kept
    duals *= sign
    x = xs[:nx]
    return SimplexResult("optimal", x, float(c @ x), list(tab2.basis), duals, None, iters)
