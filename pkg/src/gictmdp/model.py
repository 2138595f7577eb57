"""Finite gradual-impulsive and standard CTMDP instances.

Arrays are indexed state-first where that reads naturally:

* ``q[x, a, y]``  signed generator rows of the gradual actions (diagonal is ``-q_x(a)``)
* ``Q[x, b, y]``  impulse relocation kernels
* ``cG[i, x, a]`` gradual cost rates, ``cI[i, x, b]`` lump impulse costs

Index ``i = 0`` is the objective and ``i = 1..J`` are the constrained costs.
No cemetery state is stored; "no further jump" is reported as absorption.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFound, ValidationError

ROW_TOL = 1e-12


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _names(seq):
    return tuple(str(s) for s in seq)


@dataclass(frozen=True, eq=False)
class GradualImpulsiveModel:
    states: tuple
    gradual_actions: tuple
    impulse_actions: tuple
    q: np.ndarray
    Q: np.ndarray
    cG: np.ndarray
    cI: np.ndarray
    bounds: np.ndarray
    x0: int = 0
    admissible: np.ndarray = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "states", _names(self.states))
        set_(self, "gradual_actions", _names(self.gradual_actions))
        set_(self, "impulse_actions", _names(self.impulse_actions))
        n, nG, nI = len(self.states), len(self.gradual_actions), len(self.impulse_actions)
        q = np.array(self.q, dtype=float).reshape(n, nG, n)
        Q = np.array(self.Q, dtype=float).reshape(n, nI, n)
        cG = np.array(self.cG, dtype=float)
        cI = np.array(self.cI, dtype=float)
        if cG.ndim != 3 or cG.shape[1:] != (n, nG):
            raise ValueError(f"cG must have shape (J+1, {n}, {nG}), got {cG.shape}")
        ncost = cG.shape[0]
        cI = cI.reshape(ncost, n, nI)
        bounds = np.array(self.bounds, dtype=float).reshape(ncost - 1)
        if self.admissible is None:
            adm = np.ones((n, nG + nI), dtype=bool)
        else:
            adm = np.array(self.admissible, dtype=bool).reshape(n, nG + nI)
        set_(self, "q", _frozen(q))
        set_(self, "Q", _frozen(Q))
        set_(self, "cG", _frozen(cG))
        set_(self, "cI", _frozen(cI))
        set_(self, "bounds", _frozen(bounds))
        set_(self, "admissible", _frozen(adm, bool))
        set_(self, "x0", int(self.x0))

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_gradual(self):
        return len(self.gradual_actions)

    @property
    def n_impulse(self):
        return len(self.impulse_actions)

    @property
    def cost_count(self):
        return self.cG.shape[0]

    @property
    def rates(self):
        """Exit rates q_x(a), shape (n, nG)."""
        n = self.n_states
        return -self.q[np.arange(n), :, np.arange(n)]

    @property
    def qtilde(self):
        """Off-diagonal part of the generator, shape (n, nG, n)."""
        qt = np.array(self.q)
        n = self.n_states
        qt[np.arange(n), :, np.arange(n)] = 0.0
        return qt

    @property
    def grad_admissible(self):
        return self.admissible[:, : self.n_gradual]

    @property
    def imp_admissible(self):
        return self.admissible[:, self.n_gradual :]

    def state_index(self, x):
        return _lookup(self.states, x, "state")


@dataclass(frozen=True, eq=False)
class StandardModel:
    """Gradual-only model; impulses appear as rate-1 tagged actions."""

    states: tuple
    actions: tuple
    is_impulse: np.ndarray
    q: np.ndarray
    c: np.ndarray
    bounds: np.ndarray
    x0: int = 0
    admissible: np.ndarray = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "states", _names(self.states))
        set_(self, "actions", _names(self.actions))
        n, nA = len(self.states), len(self.actions)
        c = np.array(self.c, dtype=float)
        if c.ndim != 3 or c.shape[1:] != (n, nA):
            raise ValueError(f"c must have shape (J+1, {n}, {nA}), got {c.shape}")
        adm = np.ones((n, nA), bool) if self.admissible is None else self.admissible
        set_(self, "is_impulse", _frozen(np.reshape(self.is_impulse, nA), bool))
        set_(self, "q", _frozen(np.reshape(self.q, (n, nA, n))))
        set_(self, "c", _frozen(c))
        set_(self, "bounds", _frozen(np.reshape(self.bounds, c.shape[0] - 1)))
        set_(self, "admissible", _frozen(np.reshape(adm, (n, nA)), bool))
        set_(self, "x0", int(self.x0))

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def n_gradual(self):
        return int(np.sum(~self.is_impulse))

    @property
    def cost_count(self):
        return self.c.shape[0]

    @property
    def rates(self):
        n = self.n_states
        return -self.q[np.arange(n), :, np.arange(n)]

    @property
    def qtilde(self):
        qt = np.array(self.q)
        n = self.n_states
        qt[np.arange(n), :, np.arange(n)] = 0.0
        return qt

    def state_index(self, x):
        return _lookup(self.states, x, "state")

    def action_index(self, a):
        return _lookup(self.actions, a, "action")


def _lookup(names, key, what):
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if 0 <= key < len(names):
            return int(key)
        raise ValidationError(f"{what} index {key} out of range")
    try:
        return names.index(str(key))
    except ValueError:
        raise ValidationError(f"unknown {what} {key!r}") from None


@dataclass(frozen=True, eq=False)
class TimeSchedule:
    """Piecewise-constant relaxed control: finite segments then an unbounded tail.

    ``dists[p]`` is used on ``[t_p, t_p + durations[p])`` and ``tail`` afterwards.
    """

    durations: np.ndarray
    dists: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        tail = np.array(self.tail, dtype=float).ravel()
        dur = np.array(self.durations, dtype=float).ravel()
        dists = np.array(self.dists, dtype=float).reshape(len(dur), tail.size)
        if np.any(~np.isfinite(dur)) or np.any(dur <= 0):
            raise ValidationError("segment durations must be finite and positive")
        for row in (*dists, tail):
            _check_dist(row, "schedule distribution")
        object.__setattr__(self, "durations", _frozen(dur))
        object.__setattr__(self, "dists", _frozen(dists))
        object.__setattr__(self, "tail", _frozen(tail))

    @classmethod
    def constant(cls, dist):
        dist = np.asarray(dist, dtype=float).ravel()
        return cls(np.zeros(0), np.zeros((0, dist.size)), dist)

    @property
    def is_constant(self):
        return self.durations.size == 0

    @property
    def breakpoints(self):
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def support(self):
        return (self.dists.sum(axis=0) + self.tail) > 0


def _check_dist(row, what):
    if np.any(~np.isfinite(row)) or np.any(row < 0):
        raise ValidationError(f"{what} has negative or non-finite entries")
    if abs(row.sum() - 1.0) > ROW_TOL:
        raise ValidationError(f"{what} sums to {row.sum()!r}, not 1")


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Relaxed stationary policy of the standard model, ``probs[x, a]``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("policy must be a (states, actions) matrix")
        for x, row in enumerate(p):
            _check_dist(row, f"policy row {x}")
        object.__setattr__(self, "probs", _frozen(p))


@dataclass(frozen=True, eq=False)
class MarkovPolicy:
    """Markov policy: explicit epochs, then one schedule per state reused forever.

    ``epochs[n][x]`` and ``tail[x]`` are TimeSchedules over standard-model actions.
    """

    epochs: tuple
    tail: tuple

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(tuple(e) for e in self.epochs))
        object.__setattr__(self, "tail", tuple(self.tail))
        n = len(self.tail)
        if any(len(e) != n for e in self.epochs):
            raise ValidationError("every epoch needs one schedule per state")

    @classmethod
    def constant(cls, probs):
        probs = np.asarray(probs, dtype=float)
        return cls((), tuple(TimeSchedule.constant(row) for row in probs))

    @property
    def n_epochs(self):
        return len(self.epochs)

    def schedule(self, epoch, x):
        if epoch < len(self.epochs):
            return self.epochs[epoch][x]
        return self.tail[x]

    @property
    def is_constant(self):
        return all(s.is_constant for e in (*self.epochs, self.tail) for s in e)


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Stationary strategy of the gradual-impulsive model.

    At state x: impulse immediately with probability ``w_imp[x]`` (impulse drawn from
    ``beta[x]``), otherwise apply the relaxed gradual control ``f_hat[x]`` until the
    next natural jump.
    """

    w_imp: np.ndarray
    beta: np.ndarray
    f_hat: np.ndarray

    def __post_init__(self):
        w = np.array(self.w_imp, dtype=float).ravel()
        n = w.size
        beta = np.array(self.beta, dtype=float).reshape(n, -1)
        f_hat = np.array(self.f_hat, dtype=float).reshape(n, -1)
        if np.any(w < 0) or np.any(w > 1) or np.any(~np.isfinite(w)):
            raise ValidationError("w_imp must lie in [0, 1]")
        for x in range(n):
            if beta.shape[1]:
                _check_dist(beta[x], f"impulse distribution at state {x}")
            elif w[x] > 0:
                raise ValidationError("w_imp > 0 without impulsive actions")
            _check_dist(f_hat[x], f"gradual control at state {x}")
        object.__setattr__(self, "w_imp", _frozen(w))
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "f_hat", _frozen(f_hat))


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    def add(self, severity, location, message):
        self.entries.append((severity, location, message))

    @property
    def passed(self):
        return not any(sev == "error" for sev, _, _ in self.entries)

    def errors(self):
        return [e for e in self.entries if e[0] == "error"]

    def to_dict(self):
        return {
            "pass": self.passed,
            "entries": [
                {"severity": s, "location": loc, "message": msg} for s, loc, msg in self.entries
            ],
        }


def validate_gi_model(m):
    """Check every model invariant; violations become report entries."""
    rep = ValidationReport()
    n, nG, nI = m.n_states, m.n_gradual, m.n_impulse
    if len(set(m.states)) != n:
        rep.add("error", "states", "duplicate state names")
    if set(m.gradual_actions) & set(m.impulse_actions) or len(
        set(m.gradual_actions + m.impulse_actions)
    ) != nG + nI:
        rep.add("error", "actions", "action names must be unique and the kinds disjoint")
    for name in m.states + m.gradual_actions + m.impulse_actions:
        if "/" in name:
            rep.add("error", name, "names may not contain '/'")
    if n == 0:
        rep.add("error", "states", "empty state space")
    for x in range(n):
        if not m.admissible[x, :nG].any():
            rep.add("error", m.states[x], "no admissible gradual action")
        for a in range(nG):
            if not m.admissible[x, a]:
                continue
            loc = f"{m.states[x]}/{m.gradual_actions[a]}"
            row = m.q[x, a]
            if not np.all(np.isfinite(row)):
                rep.add("error", loc, "non-finite rate")
                continue
            if abs(row.sum()) > ROW_TOL:
                rep.add("error", loc, "non-conservative rate")
            off = np.delete(row, x)
            if np.any(off < 0):
                rep.add("error", loc, "negative off-diagonal rate")
            if row[x] > 0:
                rep.add("error", loc, "positive diagonal rate")
        for b in range(nI):
            if not m.admissible[x, nG + b]:
                continue
            loc = f"{m.states[x]}/{m.impulse_actions[b]}"
            row = m.Q[x, b]
            if not np.all(np.isfinite(row)) or np.any(row < 0):
                rep.add("error", loc, "impulse kernel has negative or non-finite entries")
                continue
            if row[x] != 0:
                rep.add("error", loc, "self-loop impulse")
            if abs(row.sum() - 1.0) > ROW_TOL:
                rep.add("error", loc, "impulse kernel not normalized")
    for name, arr in (("costs_g", m.cG), ("costs_i", m.cI)):
        if not np.all(np.isfinite(arr)):
            rep.add("error", name, "non-finite cost")
        elif np.any(arr < 0):
            rep.add("error", name, "negative cost")
    if not np.all(np.isfinite(m.bounds)):
        rep.add("error", "bounds", "non-finite bound")
    if not 0 <= m.x0 < max(n, 1):
        rep.add("error", "x0", "initial state out of range")
    return rep


def validate_standard_model(mgo):
    rep = ValidationReport()
    n = mgo.n_states
    for x in range(n):
        if not mgo.admissible[x].any():
            rep.add("error", mgo.states[x], "no admissible action")
        for a in range(mgo.n_actions):
            if not mgo.admissible[x, a]:
                continue
            loc = f"{mgo.states[x]}/{mgo.actions[a]}"
            row = mgo.q[x, a]
            if not np.all(np.isfinite(row)):
                rep.add("error", loc, "non-finite rate")
                continue
            if abs(row.sum()) > ROW_TOL:
                rep.add("error", loc, "non-conservative rate")
            if np.any(np.delete(row, x) < 0) or row[x] > 0:
                rep.add("error", loc, "rate sign violation")
            if mgo.is_impulse[a] and row[x] != -1.0:
                rep.add("error", loc, "impulsive action must have exit rate 1")
    if not np.all(np.isfinite(mgo.c)) or np.any(mgo.c < 0):
        rep.add("error", "costs", "costs must be finite and nonnegative")
    if not np.all(np.isfinite(mgo.bounds)):
        rep.add("error", "bounds", "non-finite bound")
    if not 0 <= mgo.x0 < max(n, 1):
        rep.add("error", "x0", "initial state out of range")
    return rep


def require_valid(m):
    rep = validate_gi_model(m) if isinstance(m, GradualImpulsiveModel) else validate_standard_model(m)
    if not rep.passed:
        sev, loc, msg = rep.errors()[0]
        raise ValidationError(f"invalid model at {loc}: {msg}", rep)
    return rep


def check_policy(mgo, pol):
    """Raise ValidationError unless pol is a stationary policy supported on admissible actions."""
    p = pol.probs
    if p.shape != (mgo.n_states, mgo.n_actions):
        raise ValidationError(f"policy shape {p.shape} does not match the model")
    if np.any(p[~mgo.admissible] > 0):
        x, a = np.argwhere((p > 0) & ~mgo.admissible)[0]
        raise ValidationError(f"policy uses inadmissible action {mgo.actions[a]} at {mgo.states[x]}")


def check_schedule(mgo, sched, x):
    if sched.tail.size != mgo.n_actions:
        raise ValidationError("schedule dimension does not match the action set")
    if np.any(sched.support() & ~mgo.admissible[x]):
        raise ValidationError(f"schedule uses an inadmissible action at state {mgo.states[x]}")


def check_strategy(m, s):
    n, nG, nI = m.n_states, m.n_gradual, m.n_impulse
    if s.w_imp.shape != (n,) or s.beta.shape != (n, nI) or s.f_hat.shape != (n, nG):
        raise ValidationError("strategy shape does not match the model")
    bad_g = (s.f_hat > 0) & ~m.grad_admissible
    bad_i = (s.beta > 0) & ~m.imp_admissible & (s.w_imp[:, None] > 0)
    if bad_g.any() or bad_i.any():
        raise ValidationError("strategy uses an inadmissible action")


# ---------------------------------------------------------------- builtins

def builtin_model(name, n_states=4):
    """Return a named builtin model.

    ``"paper-example"`` is the four-state (by default) counterexample where every
    deterministic stationary strategy is beaten by a randomized one; the chain
    ``0 -> 1 -> ... -> n_states-1`` is truncated with the impulse disabled at the
    last state. ``"two-state-smoke"`` is a cost-free two-state flip-flop.
    """
    if name == "paper-example":
        M = int(n_states)
        if M < 3:
            raise ValueError("the example needs at least 3 states")
        q = np.zeros((M, 1, M))
        q[0, 0, 0], q[0, 0, 1] = -1.0, 1.0
        Q = np.zeros((M, 1, M))
        for x in range(M - 1):
            Q[x, 0, x + 1] = 1.0
        cG = np.zeros((2, M, 1))
        cI = np.zeros((2, M, 1))
        cG[0, 0, 0] = 1.0
        cI[1, 0, 0] = 2.0
        adm = np.ones((M, 2), dtype=bool)
        adm[M - 1, 1] = False
        return GradualImpulsiveModel(
            states=[str(x) for x in range(M)],
            gradual_actions=["a"],
            impulse_actions=["b"],
            q=q, Q=Q, cG=cG, cI=cI, bounds=[1.0], x0=0, admissible=adm,
        )
    if name == "two-state-smoke":
        q = np.array([[[-1.0, 1.0]], [[1.0, -1.0]]])
        return GradualImpulsiveModel(
            states=["0", "1"], gradual_actions=["a"], impulse_actions=[],
            q=q, Q=np.zeros((2, 0, 2)), cG=np.zeros((1, 2, 1)), cI=np.zeros((1, 2, 0)),
            bounds=[], x0=0,
        )
    raise NotFound(name)


BUILTIN_NAMES = ("paper-example", "two-state-smoke")


# ---------------------------------------------------------------- JSON

def _pair(m_states, actions, x, a):
    return f"{m_states[x]}/{actions[a]}"


def _split_pair(key):
    if key.count("/") != 1:
        raise ValidationError(f"expected 'state/action' key, got {key!r}")
    return key.split("/")


def model_to_dict(m):
    """Canonical JSON-ready dict; zero entries are omitted."""
    S, G, I = m.states, m.gradual_actions, m.impulse_actions
    nG = len(G)
    q = {}
    for x in range(len(S)):
        for a in range(nG):
            row = {S[y]: float(m.q[x, a, y]) for y in range(len(S)) if y != x and m.q[x, a, y] != 0}
            if row:
                q[_pair(S, G, x, a)] = row
    Qd = {}
    for x in range(len(S)):
        for b in range(len(I)):
            row = {S[y]: float(m.Q[x, b, y]) for y in range(len(S)) if m.Q[x, b, y] != 0}
            if row:
                Qd[_pair(S, I, x, b)] = row

    def costs(arr, acts):
        out = []
        for i in range(arr.shape[0]):
            out.append({
                _pair(S, acts, x, a): float(arr[i, x, a])
                for x in range(len(S)) for a in range(len(acts)) if arr[i, x, a] != 0
            })
        return out

    d = {
        "states": list(S),
        "gradual_actions": list(G),
        "impulse_actions": list(I),
        "q": q,
        "Q": Qd,
        "costs_g": costs(m.cG, G),
        "costs_i": costs(m.cI, I),
        "bounds": [float(b) for b in m.bounds],
        "x0": S[m.x0],
    }
    if not m.admissible.all():
        acts = G + I
        d["admissible"] = {
            S[x]: [acts[a] for a in range(len(acts)) if m.admissible[x, a]]
            for x in range(len(S)) if not m.admissible[x].all()
        }
    return d


def model_from_dict(d):
    try:
        S = [str(s) for s in d["states"]]
        G = [str(a) for a in d["gradual_actions"]]
        I = [str(b) for b in d.get("impulse_actions", [])]
        sidx = {s: k for k, s in enumerate(S)}
        gidx = {a: k for k, a in enumerate(G)}
        iidx = {b: k for k, b in enumerate(I)}
        n, nG, nI = len(S), len(G), len(I)
        q = np.zeros((n, nG, n))
        for key, row in d.get("q", {}).items():
            xs, a = _split_pair(key)
            x, a = sidx[xs], gidx[a]
            for ys, rate in row.items():
                y = sidx[str(ys)]
                if y == x:
                    raise ValidationError(f"diagonal entry given for {key}; it is inferred")
                q[x, a, y] = float(rate)
            q[x, a, x] = -sum(q[x, a, y] for y in range(n) if y != x)
        Q = np.zeros((n, nI, n))
        for key, row in d.get("Q", {}).items():
            xs, b = _split_pair(key)
            x, b = sidx[xs], iidx[b]
            for ys, p in row.items():
                Q[x, b, sidx[str(ys)]] = float(p)
        costs_g = d.get("costs_g", [{}])
        costs_i = d.get("costs_i", [{} for _ in costs_g])
        if len(costs_i) != len(costs_g):
            raise ValidationError("costs_g and costs_i must list the same number of cost indices")
        J1 = max(len(costs_g), 1)
        cG = np.zeros((J1, n, nG))
        cI = np.zeros((J1, n, nI))
        for i, tab in enumerate(costs_g):
            for key, v in tab.items():
                xs, a = _split_pair(key)
                cG[i, sidx[xs], gidx[a]] = float(v)
        for i, tab in enumerate(costs_i):
            for key, v in tab.items():
                xs, b = _split_pair(key)
                cI[i, sidx[xs], iidx[b]] = float(v)
        bounds = [float(v) for v in d.get("bounds", [])]
        if len(bounds) != J1 - 1:
            raise ValidationError(f"expected {J1 - 1} bounds, got {len(bounds)}")
        x0 = d.get("x0", S[0] if S else 0)
        x0 = sidx[str(x0)] if str(x0) in sidx else int(x0)
        adm = np.ones((n, nG + nI), dtype=bool)
        allidx = {**gidx, **{b: nG + k for b, k in iidx.items()}}
        for xs, acts in d.get("admissible", {}).items():
            x = sidx[xs]
            adm[x] = False
            for a in acts:
                adm[x, allidx[a]] = True
    except KeyError as exc:
        raise ValidationError(f"unknown or missing name {exc}") from None
    except (TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model file: {exc}") from None
    return GradualImpulsiveModel(S, G, I, q, Q, cG, cI, bounds, x0, adm)


def dumps(obj):
    """Canonical JSON text: fixed key order from construction, two-space indent."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def standard_model_to_dict(mgo):
    S, A = mgo.states, mgo.actions
    q = {}
    for x in range(len(S)):
        for a in range(len(A)):
            row = {S[y]: float(mgo.q[x, a, y]) for y in range(len(S)) if y != x and mgo.q[x, a, y] != 0}
            if row:
                q[f"{S[x]}/{A[a]}"] = row
    d = {
        "states": list(S),
        "actions": [
            {"name": A[a], "kind": "impulsive" if mgo.is_impulse[a] else "gradual"}
            for a in range(len(A))
        ],
        "q": q,
        "costs": [
            {f"{S[x]}/{A[a]}": float(mgo.c[i, x, a])
             for x in range(len(S)) for a in range(len(A)) if mgo.c[i, x, a] != 0}
            for i in range(mgo.cost_count)
        ],
        "bounds": [float(b) for b in mgo.bounds],
        "x0": S[mgo.x0],
    }
    if not mgo.admissible.all():
        d["admissible"] = {
            S[x]: [A[a] for a in range(len(A)) if mgo.admissible[x, a]]
            for x in range(len(S)) if not mgo.admissible[x].all()
        }
    return d


def standard_model_from_dict(d):
    S = [str(s) for s in d["states"]]
    A = [str(a["name"]) for a in d["actions"]]
    tags = [a["kind"] == "impulsive" for a in d["actions"]]
    sidx = {s: k for k, s in enumerate(S)}
    aidx = {a: k for k, a in enumerate(A)}
    n, nA = len(S), len(A)
    q = np.zeros((n, nA, n))
    for key, row in d["q"].items():
        xs, a = _split_pair(key)
        x, a = sidx[xs], aidx[a]
        for ys, r in row.items():
            q[x, a, sidx[ys]] = float(r)
        q[x, a, x] = -sum(q[x, a, y] for y in range(n) if y != x)
    c = np.zeros((max(len(d["costs"]), 1), n, nA))
    for i, tab in enumerate(d["costs"]):
        for key, v in tab.items():
            xs, a = _split_pair(key)
            c[i, sidx[xs], aidx[a]] = float(v)
    adm = np.ones((n, nA), bool)
    for xs, acts in d.get("admissible", {}).items():
        adm[sidx[xs]] = False
        for a in acts:
            adm[sidx[xs], aidx[a]] = True
    return StandardModel(S, A, tags, q, c, d["bounds"], sidx[str(d["x0"])], adm)


def policy_from_dict(mgo, d):
    """Parse ``{state: {action: prob}}``; states may not be omitted."""
    p = np.zeros((mgo.n_states, mgo.n_actions))
    for xs, row in d.items():
        x = mgo.state_index(xs)
        for a, v in row.items():
            p[x, mgo.action_index(a)] = float(v)
    missing = [mgo.states[x] for x in range(mgo.n_states) if not p[x].any()]
    if missing:
        raise ValidationError(f"policy has no distribution for states {missing}")
    return StationaryPolicy(p)


def policy_to_dict(mgo, pol):
    return {
        mgo.states[x]: {mgo.actions[a]: float(pol.probs[x, a])
                        for a in range(mgo.n_actions) if pol.probs[x, a] > 0}
        for x in range(mgo.n_states)
    }


def strategy_to_dict(m, s):
    out = {}
    for x in range(m.n_states):
        out[m.states[x]] = {
            "w_imp": float(s.w_imp[x]),
            "beta": {m.impulse_actions[b]: float(s.beta[x, b])
                     for b in range(m.n_impulse) if s.beta[x, b] > 0},
            "f_hat": {m.gradual_actions[a]: float(s.f_hat[x, a])
                      for a in range(m.n_gradual) if s.f_hat[x, a] > 0},
        }
    return out


def strategy_from_dict(m, d):
    n, nG, nI = m.n_states, m.n_gradual, m.n_impulse
    w = np.zeros(n)
    beta = np.zeros((n, nI))
    f_hat = np.zeros((n, nG))
    gidx = {a: k for k, a in enumerate(m.gradual_actions)}
    iidx = {b: k for k, b in enumerate(m.impulse_actions)}
    seen = set()
    try:
        for xs, row in d.items():
            x = m.state_index(xs)
            seen.add(x)
            w[x] = float(row.get("w_imp", 0.0))
            for b, v in row.get("beta", {}).items():
                beta[x, iidx[b]] = float(v)
            for a, v in row.get("f_hat", {}).items():
                f_hat[x, gidx[a]] = float(v)
    except KeyError as exc:
        raise ValidationError(f"unknown action {exc}") from None
    if len(seen) != n:
        raise ValidationError("strategy must list every state")
    # an unused impulse distribution may be left empty
    for x in range(n):
        if nI and not beta[x].any():
            beta[x] = default_impulse(m, x)
    return StationaryStrategy(w, beta, f_hat)


def default_gradual(m, x):
    """Point mass on the first admissible gradual action at x (falls back to the first)."""
    nG = m.n_gradual
    out = np.zeros(nG)
    if nG:
        adm = np.flatnonzero(m.admissible[x, :nG]) if m.admissible is not None else []
        out[adm[0] if len(adm) else 0] = 1.0
    return out


def default_impulse(m, x):
    nG, nI = m.n_gradual, m.n_impulse
    out = np.zeros(nI)
    if nI:
        adm = np.flatnonzero(m.admissible[x, nG:])
        out[adm[0] if len(adm) else 0] = 1.0
    return out
