"""Seeded Monte Carlo simulation of both models under every control class.

Episodes run in lockstep inside fixed-size blocks: each pass of the main loop
samples one sojourn for every still-active episode with vectorized draws. Block
``b`` uses its own Philox stream seeded from ``(seed, b)``, so results depend only
on the seed and the inputs. Draws inside a sojourn follow a fixed order per
control class (see each step function).

Costs accrue along sampled elapsed times. Episodes end on absorption (no further
jump can occur) or at a cap; cap hits contribute their accrued cost and are
counted as truncated.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import (
    MarkovPolicy,
    StationaryPolicy,
    StationaryStrategy,
    TimeSchedule,
    check_policy,
    check_schedule,
    check_strategy,
)
from .poisson import PoissonStrategy, PseudoPoissonPolicy

BLOCK = 8192


@dataclass(frozen=True)
class SimConfig:
    episodes: int = 100_000
    seed: int = 0
    max_jumps: int = 100_000
    time_horizon: float = math.inf
    max_impulse_chain: int = 10_000
    lam: float = 1.0
    max_segments: int = 10_000   # redraw epochs within one sojourn

    def __post_init__(self):
        if self.episodes < 1 or self.max_jumps < 1 or self.max_impulse_chain < 1:
            raise ValidationError("episodes and caps must be at least 1")
        if not self.time_horizon > 0:
            raise ValidationError("time_horizon must be positive")


@dataclass
class SimEstimate:
    mean: np.ndarray
    se: np.ndarray
    truncated: int
    episodes: int
    extras: dict = field(default_factory=dict)

    def covers(self, exact, k=3.0):
        """Per-index check that ``exact`` lies within k standard errors."""
        exact = np.asarray(exact, dtype=float)
        both_inf = np.isinf(exact) & np.isinf(self.mean)
        return both_inf | (np.abs(self.mean - exact) <= k * self.se)

    def to_dict(self):
        return {
            "mean": [float(v) for v in self.mean],
            "se": [float(v) for v in self.se],
            "truncated": int(self.truncated),
            "episodes": int(self.episodes),
        }


def _rng(seed, block):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _exp(rng, rate, size=None):
    """Exponential clocks with the given rates; rate 0 gives inf."""
    rate = np.asarray(rate, dtype=float)
    e = rng.standard_exponential(size if size is not None else rate.shape)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, e / np.where(rate > 0, rate, 1.0), np.inf)


def _categorical(rng, cum, size=None):
    """Draw indices from rows of cumulative weights (last column is the total)."""
    u = rng.random(cum.shape[0] if size is None else size) * cum[:, -1]
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def _accrue(rate_costs, dt):
    """rate * dt with 0 * inf = 0."""
    out = rate_costs * np.where(np.isinf(dt), 1.0, dt)[:, None]
    return np.where(np.isinf(dt)[:, None] & (rate_costs > 0), np.inf,
                    np.where(np.isinf(dt)[:, None], 0.0, out))


# ---------------------------------------------------------------- relaxed schedules

class _Schedules:
    """Padded arrays describing piecewise-constant relaxed controls.

    Schedule s has segment starts ``start[s]``, exit rates ``rate[s]``, cumulative
    hazard at the starts ``H[s]``, cost rates ``crate[s]``, cumulative costs at the
    starts ``C[s]`` and cumulative jump weights ``cumjump[s]``. Padding segments
    start at inf; ``last[s]`` is the index of the tail segment.
    """

    def __init__(self, items):
        P = max(len(sched.durations) for *_, sched in items) + 1
        S = len(items)
        J1 = items[0][2].shape[0]
        n = items[0][1].shape[1]
        self.start = np.full((S, P), np.inf)
        self.rate = np.zeros((S, P))
        self.H = np.full((S, P), np.inf)
        self.crate = np.zeros((S, P, J1))
        self.C = np.zeros((S, P, J1))
        self.cumjump = np.zeros((S, P, n))
        self.last = np.zeros(S, dtype=np.int64)
        for s, (rates, qt, costs, sched) in enumerate(items):
            mus = list(sched.dists) + [sched.tail]
            self.last[s] = len(mus) - 1
            t = sched.breakpoints
            h = 0.0
            c = np.zeros(J1)
            for p, mu in enumerate(mus):
                r = float(rates @ mu)
                self.start[s, p] = t[p]
                self.rate[s, p] = r
                self.H[s, p] = h
                self.crate[s, p] = costs @ mu
                self.C[s, p] = c
                self.cumjump[s, p] = np.cumsum(mu @ qt)
                if p < len(sched.durations):
                    d = sched.durations[p]
                    h += r * d
                    c = c + self.crate[s, p] * d

    def sample(self, rng, sid, budget):
        """One sojourn per entry of ``sid``. Returns elapsed, cost, target, absorbed,
        horizon flag."""
        m = sid.size
        E = rng.standard_exponential(m)
        H = self.H[sid]
        p = np.maximum((H <= E[:, None]).sum(axis=1) - 1, 0)
        rows = np.arange(m)
        r = self.rate[sid, p]
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.where(r > 0, self.start[sid, p] + (E - H[rows, p]) / np.where(r > 0, r, 1.0),
                             np.inf)
        absorbed = np.isinf(theta)
        tau = np.minimum(theta, budget)
        hit = theta > budget
        q = np.minimum((self.start[sid] <= tau[:, None]).sum(axis=1) - 1, self.last[sid])
        q = np.maximum(q, 0)
        cost = self.C[sid, q] + _accrue(self.crate[sid, q], tau - self.start[sid, q])
        # targets only matter for genuine jumps
        cum = self.cumjump[sid, p]
        safe = np.where((cum[:, -1] > 0)[:, None], cum, 1.0)
        target = _categorical(rng, safe)
        return tau, cost, target, absorbed & ~hit, hit


# ---------------------------------------------------------------- episode loop

def _run(cfg, x0, J1, step, extras=None):
    n_blocks = -(-cfg.episodes // BLOCK)
    costs = np.zeros((cfg.episodes, J1))
    truncated = np.zeros(cfg.episodes, dtype=bool)
    for b in range(n_blocks):
        rng = _rng(cfg.seed, b)
        lo, hi = b * BLOCK, min(cfg.episodes, (b + 1) * BLOCK)
        B = hi - lo
        x = np.full(B, x0, dtype=np.int64)
        epoch = np.zeros(B, dtype=np.int64)
        cost = np.zeros((B, J1))
        time = np.zeros(B)
        jumps = np.zeros(B, dtype=np.int64)
        chain = np.zeros(B, dtype=np.int64)
        active = np.ones(B, dtype=bool)
        trunc = np.zeros(B, dtype=bool)
        first = True
        while active.any():
            idx = np.flatnonzero(active)
            out = step(rng, x[idx], epoch[idx], cfg.time_horizon - time[idx], first)
            first = False
            cost[idx] += out["cost"]
            time[idx] += out["elapsed"]
            chain[idx] = np.where(out["immediate"], chain[idx] + 1, 0)
            jumps[idx] += 1
            x[idx] = out["next"]
            epoch[idx] += 1
            ended = out["absorbed"]
            cut = out["hit"] | out.get("seg_cap", False) | (chain[idx] >= cfg.max_impulse_chain)
            cut = cut | ((jumps[idx] >= cfg.max_jumps) & ~ended)
            trunc[idx] |= cut & ~ended
            active[idx[ended | cut]] = False
        costs[lo:hi] = cost
        truncated[lo:hi] = trunc
    mean = costs.sum(axis=0) / cfg.episodes
    with np.errstate(invalid="ignore"):
        if cfg.episodes > 1 and np.all(np.isfinite(costs)):
            se = costs.std(axis=0, ddof=1) / math.sqrt(cfg.episodes)
        else:
            fin = np.all(np.isfinite(costs), axis=0)
            se = np.where(fin & (cfg.episodes > 1),
                          np.nan_to_num(costs.std(axis=0, ddof=1)) / math.sqrt(cfg.episodes),
                          np.where(fin, 0.0, np.inf))
    return SimEstimate(mean, se, int(truncated.sum()), cfg.episodes, extras if extras is not None else {})


def _relaxed_step(sched, sid_table):
    """Step function for schedules indexed by (epoch, state)."""
    last = sid_table.shape[0] - 1

    def step(rng, x, epoch, budget, first):
        sid = sid_table[np.minimum(epoch, last), x]
        tau, cost, target, absorbed, hit = sched.sample(rng, sid, budget)
        return {"cost": cost, "elapsed": tau, "next": np.where(absorbed | hit, x, target),
                "absorbed": absorbed, "hit": hit, "immediate": np.zeros(x.size, bool)}
    return step


def _markov_tables(mgo, pol):
    scheds = list(pol.epochs) + [pol.tail]
    items = []
    table = np.zeros((len(scheds), mgo.n_states), dtype=np.int64)
    for e, row in enumerate(scheds):
        for x, s in enumerate(row):
            check_schedule(mgo, s, x)
            table[e, x] = len(items)
            items.append((mgo.rates[x], mgo.qtilde[x], mgo.c[:, x, :], s))
    return _Schedules(items), table


# ---------------------------------------------------------------- redraw classes

def _pad_series(series_rows, kmax):
    """Stack KernelSeries (prefix padded with the tail) into an array (..., kmax + 1, d)."""
    out = []
    for s in series_rows:
        ks = [s.at(k) for k in range(kmax + 1)]
        out.append(np.array(ks))
    return np.array(out)


def _pseudo_step(mgo, pp, cfg):
    rows = list(pp.epochs) + [pp.tail]
    kmax = max(s.n_prefix for row in rows for s in row)
    kern = np.array([_pad_series(row, kmax) for row in rows])       # (E, n, kmax+1, nA)
    cumk = np.cumsum(kern, axis=-1)
    lam_bar = pp.lam * (~mgo.is_impulse)
    rates = mgo.rates
    cumjump = np.cumsum(mgo.qtilde, axis=-1)                         # (n, nA, n)
    c = np.moveaxis(mgo.c, 0, -1)                                    # (n, nA, J1)
    # tail regime with no exit at all: the sojourn never ends
    tail_k = kern[:, :, kmax]
    exits = (tail_k * rates[None]).sum(axis=-1)
    dead = exits == 0
    dead_cost = np.einsum("exa,xai->exi", (tail_k > 0).astype(float), (c > 0).astype(float)) > 0
    last = kern.shape[0] - 1
    J1 = mgo.cost_count

    def step(rng, x, epoch, budget, first):
        m = x.size
        e = np.minimum(epoch, last)
        k = np.zeros(m, dtype=np.int64)
        cost = np.zeros((m, J1))
        elapsed = np.zeros(m)
        nxt = x.copy()
        absorbed = np.zeros(m, bool)
        hit = np.zeros(m, bool)
        seg_cap = np.zeros(m, bool)
        live = np.ones(m, bool)
        while live.any():
            i = np.flatnonzero(live)
            ki = np.minimum(k[i], kmax)
            # fast-forward a tail regime that can never jump
            if math.isinf(cfg.time_horizon):
                stuck = (ki == kmax) & dead[e[i], x[i]]
                if stuck.any():
                    s = i[stuck]
                    absorbed[s] = True
                    cost[s] = np.where(dead_cost[e[s], x[s]], np.inf, cost[s])
                    elapsed[s] = np.inf
                    live[s] = False
                    i, ki = i[~stuck], ki[~stuck]
                    if i.size == 0:
                        break
            a = _categorical(rng, cumk[e[i], x[i], ki])
            psi = _exp(rng, lam_bar[a])
            clock = _exp(rng, rates[x[i], a])
            dt = np.minimum(psi, clock)
            room = budget[i] - elapsed[i]
            over = dt > room
            dt_used = np.minimum(dt, room)
            cost[i] += _accrue(c[x[i], a], dt_used)
            elapsed[i] += dt_used
            jump = (clock <= psi) & ~over
            targets = _categorical(rng, cumjump[x[i], a])
            nxt[i[jump]] = targets[jump]
            hit[i[over]] = True
            k[i] += 1
            capped = ~jump & ~over & (k[i] >= cfg.max_segments)
            seg_cap[i[capped]] = True
            live[i[jump | over | capped]] = False
        return {"cost": cost, "elapsed": elapsed, "next": nxt, "absorbed": absorbed,
                "hit": hit, "seg_cap": seg_cap, "immediate": np.zeros(m, bool)}
    return step


def _strategy_step(m, s):
    n, nI = m.n_states, m.n_impulse
    items = [(m.rates[x], m.qtilde[x], m.cG[:, x, :], TimeSchedule.constant(s.f_hat[x]))
             for x in range(n)]
    sched = _Schedules(items)
    cum_beta = np.cumsum(s.beta, axis=1) if nI else np.zeros((n, 1))
    cumQ = np.cumsum(m.Q, axis=-1)
    cI = np.moveaxis(m.cI, 0, -1)        # (n, nI, J1)

    def step(rng, x, epoch, budget, first):
        k = x.size
        tau, cost, target, absorbed, hit = sched.sample(rng, x, budget)
        u = rng.random(k)
        imp = u < s.w_imp[x]
        nxt = np.where(absorbed | hit, x, target)
        if imp.any():
            i = np.flatnonzero(imp)
            b = _categorical(rng, cum_beta[x[i]])
            y = _categorical(rng, cumQ[x[i], b])
            cost[i] = cI[x[i], b]
            tau[i] = 0.0
            nxt[i] = y
            absorbed[i] = False
            hit[i] = False
        return {"cost": cost, "elapsed": tau, "next": nxt, "absorbed": absorbed,
                "hit": hit, "immediate": imp}
    return step


def _poisson_step(m, ps, cfg, k_hist):
    n, nI = m.n_states, m.n_impulse
    rows = list(ps.epochs) + [ps.tail]
    kmax = max(max(pk.grad.n_prefix, pk.cont.n_prefix, pk.imp.n_prefix) for row in rows for pk in row)
    grad = np.array([_pad_series([pk.grad for pk in row], kmax) for row in rows])   # (E,n,K+1,nG)
    cont = np.array([_pad_series([pk.cont for pk in row], kmax) for row in rows])   # (E,n,K+1)
    impk = np.array([_pad_series([pk.imp for pk in row], kmax) for row in rows]).reshape(
        len(rows), n, kmax + 1, nI)
    cum_grad = np.cumsum(grad, axis=-1)
    cum_imp = np.cumsum(impk, axis=-1) if nI else np.ones((len(rows), n, kmax + 1, 1))
    rates = m.rates
    cumjump = np.cumsum(m.qtilde, axis=-1)
    cumQ = np.cumsum(m.Q, axis=-1)
    cG = np.moveaxis(m.cG, 0, -1)
    cI = np.moveaxis(m.cI, 0, -1)
    lam = ps.lam
    tail_g = cont[:, :, kmax]
    tail_grad = grad[:, :, kmax]
    dead = (tail_g == 1.0) & ((tail_grad * rates[None]).sum(-1) == 0)
    dead_cost = np.einsum("exa,xai->exi", (tail_grad > 0).astype(float), (cG > 0).astype(float)) > 0
    last = len(rows) - 1
    J1 = m.cost_count
    NEVER = np.iinfo(np.int64).max

    def draw_K(rng, e, x):
        """Impulse epoch index: sequential continuation draws over the prefix,
        geometric over the constant tail."""
        K = np.full(x.size, -1, dtype=np.int64)
        for k in range(kmax):
            open_ = K < 0
            u = rng.random(x.size)
            stop = open_ & (u >= cont[e, x, k])
            K[stop] = k
        open_ = K < 0
        g = tail_g[e, x]
        geo = rng.geometric(np.clip(1.0 - g, 1e-300, 1.0))
        K = np.where(open_, np.where(g >= 1.0, NEVER, kmax + geo - 1), K)
        return K

    def step(rng, x, epoch, budget, first):
        mm = x.size
        e = np.minimum(epoch, last)
        K = draw_K(rng, e, x)
        if first:
            k_hist.append(K.copy())
        k = np.zeros(mm, dtype=np.int64)
        cost = np.zeros((mm, J1))
        elapsed = np.zeros(mm)
        nxt = x.copy()
        absorbed = np.zeros(mm, bool)
        hit = np.zeros(mm, bool)
        seg_cap = np.zeros(mm, bool)
        immediate = np.zeros(mm, bool)
        live = np.ones(mm, bool)
        while live.any():
            i = np.flatnonzero(live)
            ki = np.minimum(k[i], kmax)
            # impulse scheduled at this epoch
            now = k[i] == K[i]
            if now.any():
                j = i[now]
                kj = np.minimum(k[j], kmax)
                b = _categorical(rng, cum_imp[e[j], x[j], kj])
                nxt[j] = _categorical(rng, cumQ[x[j], b])
                cost[j] += cI[x[j], b]
                immediate[j] = k[j] == 0
                live[j] = False
                i, ki = i[~now], ki[~now]
                if i.size == 0:
                    break
            if math.isinf(cfg.time_horizon):
                stuck = (ki == kmax) & dead[e[i], x[i]]
                if stuck.any():
                    s_ = i[stuck]
                    absorbed[s_] = True
                    cost[s_] = np.where(dead_cost[e[s_], x[s_]], np.inf, cost[s_])
                    elapsed[s_] = np.inf
                    live[s_] = False
                    i, ki = i[~stuck], ki[~stuck]
                    if i.size == 0:
                        break
            psi = rng.standard_exponential(i.size) / lam
            a = _categorical(rng, cum_grad[e[i], x[i], ki])
            clock = _exp(rng, rates[x[i], a])
            dt = np.minimum(psi, clock)
            room = budget[i] - elapsed[i]
            over = dt > room
            dt_used = np.minimum(dt, room)
            cost[i] += _accrue(cG[x[i], a], dt_used)
            elapsed[i] += dt_used
            jump = (clock <= psi) & ~over
            targets = _categorical(rng, cumjump[x[i], a])
            nxt[i[jump]] = targets[jump]
            hit[i[over]] = True
            k[i] += 1
            capped = ~jump & ~over & (k[i] >= cfg.max_segments)
            seg_cap[i[capped]] = True
            live[i[jump | over | capped]] = False
        return {"cost": cost, "elapsed": elapsed, "next": nxt, "absorbed": absorbed,
                "hit": hit, "seg_cap": seg_cap, "immediate": immediate}
    return step


def simulate_policy(mgo, pol, x0=None, cfg=None):
    """Monte Carlo estimate of the total costs of a policy of the standard model."""
    cfg = cfg or SimConfig()
    x0 = mgo.x0 if x0 is None else mgo.state_index(x0)
    if isinstance(pol, StationaryPolicy):
        check_policy(mgo, pol)
        pol = MarkovPolicy.constant(pol.probs)
    if isinstance(pol, MarkovPolicy):
        sched, table = _markov_tables(mgo, pol)
        step = _relaxed_step(sched, table)
    elif isinstance(pol, PseudoPoissonPolicy):
        step = _pseudo_step(mgo, pol, cfg)
    else:
        raise ValidationError(f"unsupported policy type {type(pol).__name__}")
    return _run(cfg, x0, mgo.cost_count, step)


def simulate_strategy(m, s, x0=None, cfg=None):
    """Monte Carlo estimate of the total costs of a strategy of the gradual-impulsive model.

    For Poisson-related strategies the impulse epoch index of each episode's first
    sojourn is recorded in ``extras["first_K"]`` (-1 means no impulse was scheduled).
    """
    cfg = cfg or SimConfig()
    x0 = m.x0 if x0 is None else m.state_index(x0)
    if isinstance(s, StationaryStrategy):
        check_strategy(m, s)
        return _run(cfg, x0, m.cost_count, _strategy_step(m, s))
    if isinstance(s, PoissonStrategy):
        hist = []
        est = _run(cfg, x0, m.cost_count, _poisson_step(m, s, cfg, hist))
        K = np.concatenate(hist) if hist else np.zeros(0, np.int64)
        est.extras["first_K"] = np.where(K == np.iinfo(np.int64).max, -1, K)
        return est
    raise ValidationError(f"unsupported strategy type {type(s).__name__}")
