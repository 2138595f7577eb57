"""Random finite instances and policies for property tests and acceptance runs."""
import numpy as np

from .model import GradualImpulsiveModel, StationaryPolicy, TimeSchedule

MIN_WEIGHT = 0.05   # smallest positive probability in generated distributions


def _spread(rng, k, floor=MIN_WEIGHT):
    """Random distribution on k points with every weight at least ``floor / k``-ish."""
    w = rng.dirichlet(np.ones(k))
    return (1 - floor) * w + floor / k


def random_model(rng, n_states=None, n_gradual=None, n_impulse=None, n_costs=None,
                 zero_rate_prob=0.25, mask_prob=0.2):
    """Random gradual-impulsive model with at most 8 states and 3 + 3 actions.

    At least one state has a free absorbing gradual action (rate 0, cost 0) so that
    finite total costs are common. Zero-rate gradual actions elsewhere carry zero
    cost with probability 1/2.
    """
    n = int(rng.integers(2, 9)) if n_states is None else n_states
    nG = int(rng.integers(1, 4)) if n_gradual is None else n_gradual
    nI = int(rng.integers(0, 4)) if n_impulse is None else n_impulse
    J1 = int(rng.integers(1, 4)) if n_costs is None else n_costs
    q = np.zeros((n, nG, n))
    Q = np.zeros((n, nI, n))
    cG = np.where(rng.random((J1, n, nG)) < 0.4, 0.0, rng.uniform(0.0, 2.0, (J1, n, nG)))
    cI = np.where(rng.random((J1, n, nI)) < 0.4, 0.0, rng.uniform(0.0, 2.0, (J1, n, nI)))
    exits = rng.random(n) < 0.3
    exits[rng.integers(n)] = True
    for x in range(n):
        others = np.array([y for y in range(n) if y != x])
        for a in range(nG):
            if (a == 0 and exits[x]) or rng.random() < zero_rate_prob:
                if (a == 0 and exits[x]) or rng.random() < 0.5:
                    cG[:, x, a] = 0.0
                continue
            k = int(rng.integers(1, len(others) + 1))
            tgt = rng.choice(others, size=k, replace=False)
            q[x, a, tgt] = rng.uniform(0.1, 3.0) * _spread(rng, k, 0.2)
            q[x, a, x] = -q[x, a].sum()
        for b in range(nI):
            k = int(rng.integers(1, len(others) + 1))
            tgt = rng.choice(others, size=k, replace=False)
            Q[x, b, tgt] = _spread(rng, k, 0.2)
            Q[x, b] /= Q[x, b].sum()
    adm = np.ones((n, nG + nI), dtype=bool)
    if rng.random() < mask_prob:
        adm = rng.random((n, nG + nI)) > 0.15
        adm[exits, 0] = True
        for x in range(n):
            if not adm[x, :nG].any():
                adm[x, int(rng.integers(nG))] = True
        for x, a in np.argwhere(~adm[:, :nG]):
            q[x, a] = 0.0
        for x, b in np.argwhere(~adm[:, nG:]):
            Q[x, b] = 0.0
    bounds = rng.uniform(0.5, 3.0, J1 - 1)
    return GradualImpulsiveModel(
        states=[f"s{x}" for x in range(n)],
        gradual_actions=[f"g{a}" for a in range(nG)],
        impulse_actions=[f"i{b}" for b in range(nI)],
        q=q, Q=Q, cG=cG, cI=cI, bounds=bounds, x0=int(rng.integers(n)), admissible=adm,
    )


def lift_conflict(m, probs):
    """States where a policy has no gradual exit intensity, impulse mass, and
    positive-cost zero-rate gradual mass.

    Such a policy pays gradual costs during its rate-1 impulse sojourns in the
    reduced model, while the stationary lift impulses immediately and pays none.
    """
    probs = np.asarray(probs, dtype=float)
    return np.array([_conflict_row(m, x, probs[x]) for x in range(m.n_states)], dtype=bool)


def _conflict_row(m, x, row):
    nG = m.n_gradual
    grad, imp = row[:nG], row[nG:]
    return bool(m.rates[x] @ grad == 0 and imp.sum() > 0 and (m.cG[:, x, :] @ grad > 0).any())


CASES = ("mixed", "gradual", "impulse", "idle", "any")


def _state_dist(rng, m, x, case):
    nG, nI = m.n_gradual, m.n_impulse
    adm = m.admissible[x]
    rates = m.rates[x]
    g_pos = [a for a in range(nG) if adm[a] and rates[a] > 0]
    g_zero_free = [a for a in range(nG) if adm[a] and rates[a] == 0 and not m.cG[:, x, a].any()]
    g_zero = [a for a in range(nG) if adm[a] and rates[a] == 0]
    imps = [nG + b for b in range(nI) if adm[nG + b]]
    allowed = [a for a in range(nG + nI) if adm[a]]
    if case == "mixed" and g_pos and imps:
        pool = g_pos + imps + [a for a in g_zero if rng.random() < 0.5]
    elif case == "gradual" and g_pos:
        pool = g_pos + [a for a in g_zero if rng.random() < 0.3]
    elif case == "impulse" and imps:
        pool = imps + [a for a in g_zero_free if rng.random() < 0.5]
    elif case == "idle" and g_zero:
        pool = g_zero
    else:
        pool = allowed
    k = int(rng.integers(1, len(pool) + 1))
    chosen = rng.choice(pool, size=k, replace=False)
    out = np.zeros(nG + nI)
    out[chosen] = _spread(rng, k)
    return out


def random_policy(rng, m, cases=CASES, avoid_conflict=True):
    """Random stationary policy of the reduced model of ``m`` (actions ordered gradual
    then impulsive); each state draws a case:

    * mixed: positive-rate gradual and impulse mass
    * gradual: gradual only, with positive exit rate
    * impulse: impulses (possibly with free zero-rate gradual mass)
    * idle: zero-rate gradual only (no exit)
    * any: arbitrary admissible support
    """
    n = m.n_states
    probs = np.zeros((n, m.n_gradual + m.n_impulse))
    for x in range(n):
        for _ in range(50):
            probs[x] = _state_dist(rng, m, x, cases[int(rng.integers(len(cases)))])
            if not (avoid_conflict and _conflict_row(m, x, probs[x])) and _ok(m, x, probs[x]):
                break
        else:
            probs[x] = 0.0
            adm = np.flatnonzero(m.admissible[x])
            probs[x, adm[0]] = 1.0
    return StationaryPolicy(probs)


def _ok(m, x, row):
    return row.sum() > 0 and not np.any((row > 0) & ~m.admissible[x])


def random_schedule(rng, mgo, x, n_segments=None, max_duration=1.5):
    """Random piecewise-constant relaxed control over the admissible actions at x."""
    P = int(rng.integers(1, 4)) if n_segments is None else n_segments
    adm = np.flatnonzero(mgo.admissible[x])

    def dist():
        k = int(rng.integers(1, adm.size + 1))
        chosen = rng.choice(adm, size=k, replace=False)
        out = np.zeros(mgo.n_actions)
        out[chosen] = _spread(rng, k)
        return out

    durs = rng.uniform(0.1, max_duration, P)
    return TimeSchedule(durs, np.array([dist() for _ in range(P)]), dist())


def with_bounds(m, bounds):
    """Copy of ``m`` with new constraint bounds."""
    return GradualImpulsiveModel(m.states, m.gradual_actions, m.impulse_actions, m.q, m.Q,
                                 m.cG, m.cI, bounds, m.x0, m.admissible)


def feasible_bounds(rng, m, mgo, keep=20, draws=40, max_tries=200):
    """Bounds under which at least ``keep`` random stationary policies are feasible.

    Draws up to ``max_tries`` policies until ``draws`` have finite costs, ranks them
    by their worst constrained cost relative to the median, and takes the
    componentwise maximum over the best ``keep``. Returns (bounds, policies, W) for
    those policies, or None when too few finite policies turn up.
    """
    from .bellman import evaluate_policy

    pols, Ws = [], []
    for _ in range(max_tries):
        pol = random_policy(rng, m, avoid_conflict=False)
        W = evaluate_policy(mgo, pol).W
        if np.all(np.isfinite(W)):
            pols.append(pol)
            Ws.append(W)
        if len(Ws) == draws:
            break
    if len(Ws) < keep:
        return None
    Ws = np.array(Ws)
    scale = np.median(Ws[:, 1:], axis=0) + 1e-12
    best = np.argsort(np.max(Ws[:, 1:] / scale, axis=1, initial=0.0), kind="stable")[:keep]
    return Ws[best, 1:].max(axis=0), [pols[i] for i in best], Ws[best]
