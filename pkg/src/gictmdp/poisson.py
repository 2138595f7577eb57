"""Pseudo-Poisson policies and Poisson-related strategies built from Markov policies.

A pseudo-Poisson policy of the standard model redraws its action at the epochs of an
exponential clock that ticks at rate lambda while a gradual action is in force (an
impulsive draw is held until its own rate-1 pseudo-jump). The k-th redraw uses
kernel ``pbar_k``. Choosing the kernels as below makes the one-step law coincide
with that of the Markov policy it is built from, for every lambda.

A Poisson-related strategy of the gradual-impulsive model splits each such kernel
into a continuation probability ``g_k`` (mass on gradual actions), a gradual kernel
and an impulse kernel; an impulse is applied at the first redraw epoch that
selects it.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .dynamics import KernelSeries
from .errors import NumericalFailure, ValidationError
from .model import MarkovPolicy, check_schedule, default_gradual, default_impulse

K_CUT = 32
QUAD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PseudoPoissonPolicy:
    """``epochs[n][x]`` and ``tail[x]`` are KernelSeries over standard-model actions."""

    lam: float
    epochs: tuple
    tail: tuple
    approx: np.ndarray  # (n_epochs + 1, n_states); last row is the tail epoch

    def kernels(self, epoch, x):
        return self.epochs[epoch][x] if epoch < len(self.epochs) else self.tail[x]

    @property
    def n_epochs(self):
        return len(self.epochs)


@dataclass(frozen=True, eq=False)
class PoissonKernels:
    grad: KernelSeries   # over A^G
    cont: KernelSeries   # scalar continuation probabilities g_k
    imp: KernelSeries    # over A^I


@dataclass(frozen=True, eq=False)
class PoissonStrategy:
    """``epochs[n][x]`` and ``tail[x]`` are PoissonKernels."""

    lam: float
    epochs: tuple
    tail: tuple

    def kernels(self, epoch, x):
        return self.epochs[epoch][x] if epoch < len(self.epochs) else self.tail[x]

    @property
    def n_epochs(self):
        return len(self.epochs)


def constant_pseudo_kernel(mgo, x, mu, lam):
    """Redraw kernel of a constant relaxed control: proportional to (rate + lambda-bar) * mu."""
    kappa = lam * (~mgo.is_impulse) + mgo.rates[x]
    w = kappa * mu
    return w / w.sum()


def _fallback_kernel(mgo, x):
    out = np.zeros(mgo.n_actions)
    imp = np.flatnonzero(mgo.is_impulse & mgo.admissible[x])
    if imp.size == 0:
        raise NumericalFailure(f"redraw kernel undefined at {mgo.states[x]} and no impulse exists")
    out[imp[0]] = 1.0
    return out


def _schedule_kernels(mgo, x, sched, lam, quad_tol, k_cut):
    """Redraw kernels for a piecewise-constant schedule.

    Let D(w) be the survival to time w under the total intensity
    sum_a (q_a + lambda_a) mu_w(a), and N(w)(a) the mass of action a still to be
    drawn after w. Kernel 0 is N(0). Kernel k >= 1 is the ratio of the integrals of
    ell(w) L(w)^(k-1)/(k-1)! N(w) and of the same weight times D(w), where ell is the
    gradual redraw intensity and L its running integral. N is closed form per
    segment; the outer integral uses adaptive quadrature on each finite segment
    and a closed form beyond the last breakpoint.
    """
    grad = (~mgo.is_impulse).astype(float)
    kappa = lam * grad + mgo.rates[x]
    mus = np.vstack([sched.dists, sched.tail[None, :]])
    dur = sched.durations
    P = dur.size
    t = sched.breakpoints                       # t_0 .. t_P
    Lam = mus @ kappa                           # total intensity per segment
    ell = lam * (mus @ grad)                    # gradual redraw intensity per segment
    E = np.concatenate([[0.0], np.cumsum(Lam[:P] * dur)])
    L = np.concatenate([[0.0], np.cumsum(ell[:P] * dur)])
    # mass of each later segment's draws, as seen from its own start, times survival
    seg_mass = np.zeros((P + 1, mgo.n_actions))
    for p in range(P):
        seg_mass[p] = kappa * mus[p] * math.exp(-E[p]) * (-math.expm1(-Lam[p] * dur[p])) / Lam[p]
    seg_mass[P] = kappa * mus[P] * math.exp(-E[P]) / Lam[P]
    after = np.cumsum(seg_mass[::-1], axis=0)[::-1]      # after[p] = sum_{i >= p}

    def N(w, p):
        # undrawn mass from time w inside segment p
        Ew = E[p] + Lam[p] * (w - t[p])
        part = kappa * mus[p] * math.exp(-Ew) * (-math.expm1(-Lam[p] * (t[p + 1] - w))) / Lam[p]
        rest = after[p + 1] if p + 1 <= P else 0.0
        return part + rest

    kernels = [N(0.0, 0) if P > 0 else seg_mass[P]]
    tail_kernel = kappa * mus[P] / Lam[P]
    LT, ET = L[P], E[P]
    zero_den_1 = None
    for k in range(1, k_cut + 1):
        # scale the weight by (k-1)!/LT^(k-1) so every integral is O(1) in k
        scale_log = (math.lgamma(k) - (k - 1) * math.log(LT)) if LT > 0 else 0.0

        def weight(w, p, k=k):
            Lw = L[p] + ell[p] * (w - t[p])
            if k == 1:
                return ell[p]
            if LT > 0:
                return ell[p] * (Lw / LT) ** (k - 1)
            return 0.0

        num = np.zeros(mgo.n_actions)
        den = 0.0
        for p in range(P):
            if ell[p] == 0:
                continue

            def f(w, p=p):
                Ew = E[p] + Lam[p] * (w - t[p])
                wt = weight(w, p)
                return np.concatenate([wt * N(w, p), [wt * math.exp(-Ew)]])

            val, err = quad_vec(f, t[p], t[p + 1], epsabs=0.0, epsrel=quad_tol, norm="max")
            if not np.all(np.isfinite(val)):
                raise NumericalFailure("quadrature produced non-finite values",
                                       {"state": mgo.states[x], "k": k, "segment": p})
            num += val[:-1]
            den += val[-1]
        # closed-form contribution from [T, inf), kept in log scale
        log_tail = -math.inf
        if ell[P] > 0:
            log_ratio = math.log(ell[P] / Lam[P])
            logs = []
            for j in range(k):
                m_ = k - 1 - j
                if LT > 0:
                    logs.append(m_ * math.log(LT) - math.lgamma(m_ + 1) + scale_log
                                + (j + 1) * log_ratio)
                elif m_ == 0:
                    logs.append((j + 1) * log_ratio)
            top = max(logs)
            log_tail = top + math.log(sum(math.exp(v - top) for v in logs)) - ET
        if den > 0 and log_tail > math.log(den):
            s_ = math.exp(-log_tail)
            num, den = num * s_ + tail_kernel, den * s_ + 1.0
        elif log_tail > -math.inf:
            w_ = math.exp(log_tail)
            num, den = num + w_ * tail_kernel, den + w_
        if k == 1:
            zero_den_1 = den == 0.0
        if den > 0:
            p_k = np.clip(num / den, 0.0, None)
            p_k = p_k / p_k.sum()
        else:
            p_k = _fallback_kernel(mgo, x)
        kernels.append(p_k)
    structurally_zero = not np.any(ell > 0)
    if zero_den_1 != structurally_zero:
        raise NumericalFailure("redraw-time integral vanished for k=1 but not structurally",
                               {"state": mgo.states[x]})
    pre = np.array(kernels)
    pre = np.clip(pre, 0.0, None)
    pre = pre / pre.sum(axis=1, keepdims=True)
    return KernelSeries(pre, tail_kernel)


def build_pseudo_policy(mgo, pol, lam=1.0, quad_tol=QUAD_TOL, k_cut=K_CUT):
    """Pseudo-Poisson policy with the same one-step laws as the Markov policy ``pol``.

    Constant schedules give one k-independent kernel; piecewise schedules get
    ``k_cut + 1`` explicit kernels followed by the last segment's kernel, and are
    flagged as approximations.
    """
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    if not isinstance(pol, MarkovPolicy):
        pol = MarkovPolicy.constant(pol.probs)
    n = mgo.n_states
    epochs = []
    approx = np.zeros((pol.n_epochs + 1, n), dtype=bool)
    for e, scheds in enumerate(list(pol.epochs) + [pol.tail]):
        row = []
        for x, sched in enumerate(scheds):
            check_schedule(mgo, sched, x)
            if sched.is_constant:
                row.append(KernelSeries.constant(constant_pseudo_kernel(mgo, x, sched.tail, lam)))
            else:
                row.append(_schedule_kernels(mgo, x, sched, lam, quad_tol, k_cut))
                approx[e, x] = True
        epochs.append(tuple(row))
    return PseudoPoissonPolicy(float(lam), tuple(epochs[:-1]), epochs[-1], approx)


def _split(m, x, pbar):
    """Continuation probability, gradual kernel and impulse kernel from one redraw kernel."""
    nG = m.n_gradual
    pg, pi = pbar[:nG], pbar[nG:]
    mg, mi = float(pg.sum()), float(pi.sum())
    if mi == 0.0:
        g = 1.0
    elif mg == 0.0:
        g = 0.0
    else:
        g = mg / (mg + mi)
    grad = pg / mg if mg > 0 else default_gradual(m, x)
    imp = pi / mi if mi > 0 else default_impulse(m, x)
    return g, grad, imp


def _split_series(m, x, series):
    parts = [_split(m, x, p) for p in series.all()]
    g = np.array([c[0] for c in parts])
    grad = np.array([c[1] for c in parts])
    imp = np.array([c[2] for c in parts])
    return PoissonKernels(
        KernelSeries(grad[:-1], grad[-1]),
        KernelSeries(g[:-1], g[-1]),
        KernelSeries(imp[:-1], imp[-1]),
    )


def build_poisson_strategy(m, pp):
    """Poisson-related strategy of the gradual-impulsive model from a pseudo-Poisson policy."""
    n = m.n_states
    if len(pp.tail) != n:
        raise ValidationError("pseudo-Poisson policy does not match the model")
    epochs = tuple(tuple(_split_series(m, x, e[x]) for x in range(n)) for e in pp.epochs)
    tail = tuple(_split_series(m, x, pp.tail[x]) for x in range(n))
    return PoissonStrategy(pp.lam, epochs, tail)
