"""Exact one-step jump laws for every control class.

A JumpLaw describes one sojourn started at a state: where the process goes next,
the probability that it never jumps again, and the expected costs accumulated on
the way. Piecewise-constant controls are integrated in closed form per segment;
the redraw-at-exponential-epochs classes are summed as series whose geometric
tail is summed in closed form.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import Diverges, ValidationError
from .model import ROW_TOL, TimeSchedule

K_MAX = 100_000
SERIES_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JumpLaw:
    next: np.ndarray
    absorb: float
    sojourn_cost: np.ndarray
    mean_sojourn: float
    trunc_error: float = 0.0

    @property
    def mass(self):
        return float(self.next.sum() + self.absorb)

    def to_dict(self, states=None):
        names = states or [str(y) for y in range(self.next.size)]
        return {
            "next": {names[y]: float(p) for y, p in enumerate(self.next) if p != 0},
            "absorb": float(self.absorb),
            "sojourn_cost": [float(c) for c in self.sojourn_cost],
            "mean_sojourn": float(self.mean_sojourn),
            "trunc_error": float(self.trunc_error),
        }


def _scale(w, v):
    """w * v with 0 * inf taken as 0."""
    v = np.asarray(v, dtype=float)
    if w == 0:
        return np.zeros_like(v)
    return w * v


def mix_laws(weighted):
    """Mixture of JumpLaws; zero-weight components are skipped entirely."""
    weighted = [(w, law) for w, law in weighted if w > 0]
    first = weighted[0][1]
    nxt = np.zeros_like(first.next)
    cost = np.zeros_like(first.sojourn_cost)
    absorb = time = trunc = 0.0
    for w, law in weighted:
        nxt = nxt + w * law.next
        cost = cost + _scale(w, law.sojourn_cost)
        absorb += w * law.absorb
        time += w * law.mean_sojourn
        trunc += w * law.trunc_error
    return JumpLaw(nxt, absorb, cost, time, trunc)


@dataclass(frozen=True, eq=False)
class KernelSeries:
    """Sequence of kernels indexed by k: an explicit prefix, then one tail kernel.

    Entries may be distributions (vectors) or scalars; ``prefix[k]`` is used for
    ``k < len(prefix)`` and ``tail`` for every later k.
    """

    prefix: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        tail = np.asarray(self.tail, dtype=float)
        prefix = np.asarray(self.prefix, dtype=float)
        prefix = prefix.reshape((len(prefix),) + tail.shape)
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def constant(cls, value):
        value = np.asarray(value, dtype=float)
        return cls(np.zeros((0,) + value.shape), value)

    @property
    def n_prefix(self):
        return self.prefix.shape[0]

    def at(self, k):
        return self.prefix[k] if k < self.n_prefix else self.tail

    def all(self):
        return list(self.prefix) + [self.tail]


# ---------------------------------------------------------------- piecewise controls

def _segment_integral(rate, d):
    """Integral of exp(-rate s) over [0, d]; d may be inf."""
    if math.isinf(d):
        return math.inf if rate == 0 else 1.0 / rate
    if rate == 0:
        return d
    return -math.expm1(-rate * d) / rate


def _flow(pieces, horizon):
    """Integrate a piecewise-constant exit intensity up to ``horizon``.

    ``pieces`` is a list of (duration, rate, jump_vec, cost_vec) with the last
    piece having duration inf. Returns next, cost, time, survival at the horizon.
    """
    nxt = np.zeros_like(pieces[0][2])
    cost = np.zeros_like(pieces[0][3])
    time = 0.0
    surv = 1.0
    t = 0.0
    for dur, rate, jump, crate in pieces:
        if t >= horizon or surv == 0.0:
            break
        d = min(dur, horizon - t)
        f = _segment_integral(rate, d)
        if math.isinf(f):
            # zero exit rate forever: the survival mass never leaves
            cost = cost + np.where(crate > 0, math.inf, 0.0)
            time = math.inf
            return nxt, cost, time, surv
        nxt = nxt + surv * f * jump
        cost = cost + surv * f * crate
        time += surv * f
        surv = surv * (math.exp(-rate * d) if not math.isinf(d) else 0.0)
        t += d
    return nxt, cost, time, surv


def _check_rho(rho, dim, admissible, what):
    if not isinstance(rho, TimeSchedule):
        rho = TimeSchedule.constant(rho)
    if rho.tail.size != dim:
        raise ValidationError(f"{what} has {rho.tail.size} entries, expected {dim}")
    if np.any(rho.support() & ~admissible):
        raise ValidationError(f"{what} puts mass on an inadmissible action")
    return rho


def _pieces(rho, rates, qtilde, costs):
    """Segment data for a schedule: (duration, total rate, jump rates, cost rates)."""
    out = []
    for dur, mu in zip(list(rho.durations) + [math.inf], list(rho.dists) + [rho.tail]):
        out.append((dur, float(rates @ mu), mu @ qtilde, costs @ mu))
    return out


def gi_jump_law(m, x, c_hat, b_hat, rho):
    """One sojourn of the gradual-impulsive model under the choice (c_hat, b_hat, rho).

    Natural jumps follow the relaxed gradual control ``rho`` until the planned
    impulse time ``c_hat``; if no natural jump happened by then, the impulse
    ``b_hat`` (an index or a distribution over impulses) relocates the process
    and pays its lump cost. With ``c_hat = inf`` the survival mass is absorption.
    """
    x = m.state_index(x)
    rho = _check_rho(rho, m.n_gradual, m.grad_admissible[x], "gradual control")
    c_hat = float(c_hat)
    if c_hat < 0 or math.isnan(c_hat):
        raise ValidationError("planned impulse time must lie in [0, inf]")
    pieces = _pieces(rho, m.rates[x], m.qtilde[x], m.cG[:, x, :])
    nxt, cost, time, surv = _flow(pieces, c_hat)
    absorb = 0.0
    if math.isinf(c_hat):
        absorb = surv
        if surv > 0:
            time = math.inf
    elif surv > 0:
        beta = _impulse_dist(m, x, b_hat)
        nxt = nxt + surv * (beta @ m.Q[x])
        cost = cost + surv * (m.cI[:, x, :] @ beta)
    return JumpLaw(nxt, float(absorb), cost, float(time), 0.0)


def _impulse_dist(m, x, b_hat):
    nI = m.n_impulse
    if nI == 0:
        raise ValidationError("impulse requested but the model has no impulsive actions")
    if np.ndim(b_hat) == 0:
        beta = np.zeros(nI)
        beta[int(b_hat)] = 1.0
    else:
        beta = np.asarray(b_hat, dtype=float)
        if beta.shape != (nI,) or np.any(beta < 0) or abs(beta.sum() - 1) > ROW_TOL:
            raise ValidationError("impulse distribution is not normalized")
    if np.any((beta > 0) & ~m.imp_admissible[x]):
        raise ValidationError(f"inadmissible impulse at state {m.states[x]}")
    return beta


def go_jump_law(mgo, x, rho):
    """One sojourn of the standard model under a piecewise-constant relaxed control."""
    x = mgo.state_index(x)
    rho = _check_rho(rho, mgo.n_actions, mgo.admissible[x], "relaxed control")
    pieces = _pieces(rho, mgo.rates[x], mgo.qtilde[x], mgo.c[:, x, :])
    nxt, cost, time, surv = _flow(pieces, math.inf)
    if surv > 0:
        time = math.inf
    return JumpLaw(nxt, float(surv), cost, float(time), 0.0)


# ---------------------------------------------------------------- series laws

@dataclass
class _Term:
    jump: np.ndarray   # expected next-state mass contributed by this segment
    cost: np.ndarray   # expected cost accrued in this segment
    time: float
    stay: float        # probability of passing to the next segment
    exit: float        # 1 - stay, computed directly so exact zeros survive


def _sum_series(prefix_terms, tail_term, tol, k_max, name):
    nxt = np.zeros_like(tail_term.jump)
    cost = np.zeros_like(tail_term.cost)
    time = 0.0
    P = 1.0
    for term in prefix_terms:
        if P < tol:
            return JumpLaw(nxt, 0.0, cost, time, P)
        nxt = nxt + P * term.jump
        cost = cost + P * term.cost
        time += P * term.time
        P *= term.stay
    if P < tol:
        return JumpLaw(nxt, 0.0, cost, time, P)
    if P == 0:
        return JumpLaw(nxt, 0.0, cost, time, 0.0)
    t = tail_term
    if t.exit == 0.0:
        # tail never exits: remaining mass is absorbed
        cost = cost + np.where(t.cost > 0, math.inf, 0.0)
        return JumpLaw(nxt, P, cost, math.inf, 0.0)
    r = t.stay
    if r <= 0.0:
        n_terms, rest = 1, 0.0
    else:
        n_terms = max(1, math.ceil(math.log(tol / P) / math.log(r)))
        rest = math.exp(n_terms * math.log(r))
    if len(prefix_terms) + n_terms > k_max:
        raise Diverges(
            f"series at state {name} needs {len(prefix_terms) + n_terms} terms "
            f"(contraction factor {r!r})", state=name)
    geo = P * (1.0 - rest) / t.exit
    nxt = nxt + geo * t.jump
    cost = cost + geo * t.cost
    time += geo * t.time
    return JumpLaw(nxt, 0.0, cost, time, P * rest)


def _pseudo_term(p, kappa, lam_bar, rates, qtilde, costs):
    w = np.divide(p, kappa, out=np.zeros_like(p), where=p > 0)
    return _Term(
        jump=w @ qtilde,
        cost=costs @ w,
        time=float(w.sum()),
        stay=float(w @ lam_bar),
        exit=float(w @ rates),
    )


def pseudo_jump_law(mgo, kernels, x, lam, tol=SERIES_TOL, k_max=K_MAX):
    """One sojourn of a pseudo-Poisson policy whose k-th redraw uses ``kernels.at(k)``.

    Gradual draws are held for an Exp(lam) time and then redrawn; impulsive draws
    are held until their rate-1 pseudo-jump.
    """
    x = mgo.state_index(x)
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    rates = mgo.rates[x]
    lam_bar = lam * (~mgo.is_impulse)
    kappa = lam_bar + rates
    args = (kappa, lam_bar, rates, mgo.qtilde[x], mgo.c[:, x, :])
    for p in kernels.all():
        if p.shape != (mgo.n_actions,) or abs(p.sum() - 1) > 1e-10 or np.any(p < 0):
            raise ValidationError("pseudo-Poisson kernel is not a distribution over actions")
        if np.any((p > 0) & ~mgo.admissible[x]):
            raise ValidationError(f"kernel uses an inadmissible action at {mgo.states[x]}")
    prefix = [_pseudo_term(p, *args) for p in kernels.prefix]
    tail = _pseudo_term(kernels.tail, *args)
    return _sum_series(prefix, tail, tol, k_max, mgo.states[x])


def _poisson_term(g, p, beta, lam, rates, qtilde, cG, Q, cI):
    w = p / (lam + rates)
    jump = g * (w @ qtilde)
    cost = g * (cG @ w)
    if g < 1.0:
        jump = jump + (1.0 - g) * (beta @ Q)
        cost = cost + (1.0 - g) * (cI @ beta)
    return _Term(
        jump=jump,
        cost=cost,
        time=float(g * w.sum()),
        stay=float(g * lam * w.sum()),
        exit=float((1.0 - g) + g * (w @ rates)),
    )


def poisson_jump_law(m, grad_kernels, cont_probs, imp_kernels, x, lam, tol=SERIES_TOL,
                     k_max=K_MAX):
    """One sojourn of a Poisson-related strategy of the gradual-impulsive model.

    At each redraw epoch k (Exp(lam) apart, the first at time 0) the strategy either
    continues gradually with probability ``cont_probs.at(k)``, drawing a gradual
    action from ``grad_kernels.at(k)``, or applies an impulse drawn from
    ``imp_kernels.at(k)`` at that epoch.
    """
    x = m.state_index(x)
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    nG, nI = m.n_gradual, m.n_impulse
    ga, ia = m.grad_admissible[x], m.imp_admissible[x]
    args = (lam, m.rates[x], m.qtilde[x], m.cG[:, x, :], m.Q[x], m.cI[:, x, :])

    def term(k):
        g = float(cont_probs.at(k))
        p, beta = grad_kernels.at(k), imp_kernels.at(k)
        if not 0.0 <= g <= 1.0:
            raise ValidationError("continuation probability outside [0, 1]")
        if g > 0 and (p.shape != (nG,) or abs(p.sum() - 1) > 1e-10 or np.any(p[~ga] > 0)):
            raise ValidationError("gradual kernel is not an admissible distribution")
        if g < 1 and (beta.shape != (nI,) or abs(beta.sum() - 1) > 1e-10 or np.any(beta[~ia] > 0)):
            raise ValidationError("impulse kernel is not an admissible distribution")
        return _poisson_term(g, p, beta, *args)

    n_pre = max(grad_kernels.n_prefix, cont_probs.n_prefix, imp_kernels.n_prefix)
    prefix = [term(k) for k in range(n_pre)]
    return _sum_series(prefix, term(n_pre), tol, k_max, m.states[x])
