"""Reduction of a gradual-impulsive model to a gradual-only one, and the stationary lift."""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import (
    StandardModel,
    StationaryPolicy,
    StationaryStrategy,
    check_policy,
    default_gradual,
    default_impulse,
    require_valid,
)

# threshold on D(x) for the positive-exit set
O_THRESHOLD = 1e-12


@dataclass(frozen=True)
class LiftOptions:
    """Fallback distributions for branches the policy never reaches.

    ``None`` means a point mass on the first admissible action of that kind.
    """

    p_star: np.ndarray = None
    p_star_star: np.ndarray = None


def reduce_model(m):
    """Gradual-only model: each impulse becomes a rate-1 action jumping by Q
    and paying the lump cost as a cost rate."""
    require_valid(m)
    n, nG, nI = m.n_states, m.n_gradual, m.n_impulse
    q = np.zeros((n, nG + nI, n))
    q[:, :nG] = m.q
    q[:, nG:] = m.Q
    q[np.arange(n), nG:, np.arange(n)] = -1.0
    # inadmissible impulse rows (e.g. all-zero Q) are left alone
    for x, b in np.argwhere(~m.imp_admissible):
        q[x, nG + b] = 0.0
    c = np.concatenate([m.cG, m.cI], axis=2)
    tags = np.r_[np.zeros(nG, bool), np.ones(nI, bool)]
    return StandardModel(
        states=m.states,
        actions=m.gradual_actions + m.impulse_actions,
        is_impulse=tags,
        q=q, c=c, bounds=m.bounds, x0=m.x0, admissible=m.admissible,
    )


def _defaults(m, x, opts):
    if opts is not None and opts.p_star is not None:
        p_star = np.asarray(opts.p_star, float)
    else:
        p_star = default_gradual(m, x)
    if opts is not None and opts.p_star_star is not None:
        p_ss = np.asarray(opts.p_star_star, float)
    else:
        p_ss = default_impulse(m, x)
    return p_star, p_ss


def positive_exit_weight(m, probs):
    """D(x) = sum_G q_x(a) F(a|x) + F(A^I|x) for each state."""
    nG = m.n_gradual
    return (m.rates * probs[:, :nG]).sum(axis=1) + probs[:, nG:].sum(axis=1)


def lift_stationary_policy(fbar, m, opts=None):
    """Stationary strategy of the gradual-impulsive model replicating ``fbar``.

    On states where the policy can leave (D > 0) the impulse weight is the share of
    exit intensity contributed by impulses. Elsewhere the policy is purely gradual at
    zero rate and is kept as the gradual control.
    """
    mgo_shape = (m.n_states, m.n_gradual + m.n_impulse)
    if fbar.probs.shape != mgo_shape:
        raise ValidationError("policy does not match the reduced action set")
    if np.any((fbar.probs > 0) & ~m.admissible):
        raise ValidationError("policy uses an inadmissible action")
    nG = m.n_gradual
    P = fbar.probs
    D = positive_exit_weight(m, P)
    n = m.n_states
    w = np.zeros(n)
    beta = np.zeros((n, m.n_impulse))
    f_hat = np.zeros((n, nG))
    for x in range(n):
        p_star, p_ss = _defaults(m, x, opts)
        grad, imp = P[x, :nG], P[x, nG:]
        mass_g, mass_i = grad.sum(), imp.sum()
        beta[x] = imp / mass_i if mass_i > 0 else p_ss
        if D[x] > O_THRESHOLD:
            w[x] = mass_i / D[x]
            f_hat[x] = grad / mass_g if mass_g > 0 else p_star
        else:
            f_hat[x] = grad / mass_g
    return StationaryStrategy(np.minimum(w, 1.0), beta, f_hat)


def deterministic_policy(mgo, actions):
    """Point-mass StationaryPolicy from one action (index or name) per state."""
    p = np.zeros((mgo.n_states, mgo.n_actions))
    for x, a in enumerate(actions):
        p[x, mgo.action_index(a)] = 1.0
    pol = StationaryPolicy(p)
    check_policy(mgo, pol)
    return pol
