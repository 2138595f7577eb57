import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conftest import law_gap
from gictmdp.corpus import random_model, random_schedule
from gictmdp.dynamics import (
    JumpLaw,
    KernelSeries,
    gi_jump_law,
    go_jump_law,
    mix_laws,
    poisson_jump_law,
    pseudo_jump_law,
)
from gictmdp.errors import Diverges, ValidationError
from gictmdp.model import MarkovPolicy, TimeSchedule
from gictmdp.poisson import build_poisson_strategy, build_pseudo_policy, constant_pseudo_kernel
from gictmdp.reduction import reduce_model


def test_gradual_sojourn_example(example):
    law = gi_jump_law(example, 0, math.inf, 0, [1.0])
    assert np.allclose(law.next, [0, 1, 0, 0], atol=1e-15)
    assert law.absorb == 0.0
    assert np.allclose(law.sojourn_cost, [1.0, 0.0])
    assert law.mean_sojourn == pytest.approx(1.0)


def test_immediate_impulse_example(example):
    law = gi_jump_law(example, 0, 0.0, 0, [1.0])
    assert np.array_equal(law.next, [0, 1, 0, 0])
    assert np.array_equal(law.sojourn_cost, [0.0, 2.0])
    assert law.mean_sojourn == 0.0


def test_planned_impulse_race(example):
    # natural jump before c = 1 w.p. 1 - e^-1, otherwise impulse; both land in 1
    law = gi_jump_law(example, 0, 1.0, 0, [1.0])
    assert np.allclose(law.next, [0, 1, 0, 0])
    assert law.sojourn_cost[0] == pytest.approx(1 - math.exp(-1))
    assert law.sojourn_cost[1] == pytest.approx(2 * math.exp(-1))


def test_rate_free_state_absorbs():
    m = random_model(np.random.default_rng(0), n_states=2, n_gradual=1, n_impulse=0, n_costs=2)
    mgo = reduce_model(m)
    x = int(np.argmin(m.rates[:, 0]))
    assert m.rates[x, 0] == 0
    law = gi_jump_law(m, x, math.inf, 0, [1.0])
    assert law.absorb == 1.0 and not law.next.any()
    expect = np.where(m.cG[:, x, 0] > 0, math.inf, 0.0)
    assert np.array_equal(law.sojourn_cost, expect)
    assert go_jump_law(mgo, x, [1.0]).absorb == 1.0


def test_mixed_relaxed_control_example(example_go):
    law = go_jump_law(example_go, 0, [0.5, 0.5])
    assert np.allclose(law.next, [0, 1, 0, 0])
    assert np.allclose(law.sojourn_cost, [0.5, 1.0])
    assert law.mean_sojourn == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_constant_control_exponential_identity(seed):
    rng = np.random.default_rng(seed)
    mgo = reduce_model(random_model(rng))
    for x in range(mgo.n_states):
        adm = np.flatnonzero(mgo.admissible[x])
        mu = np.zeros(mgo.n_actions)
        mu[adm] = rng.dirichlet(np.ones(adm.size))
        rate = mgo.rates[x] @ mu
        law = go_jump_law(mgo, x, mu)
        if rate > 0:
            assert np.allclose(law.next, mu @ mgo.qtilde[x] / rate, rtol=1e-13, atol=1e-15)
            assert np.allclose(law.sojourn_cost, mgo.c[:, x] @ mu / rate, rtol=1e-13)
            assert law.absorb == 0.0
        else:
            assert law.absorb == 1.0


def test_non_normalized_control_rejected(example_go):
    with pytest.raises(ValidationError):
        go_jump_law(example_go, 0, [0.5, 0.4])


def _quad_oracle(sched, rates, qtilde, costs, horizon=math.inf):
    """Integrals of the sojourn under a schedule by adaptive quadrature per segment."""
    bps = list(sched.breakpoints)
    segs = list(zip(bps[:-1], bps[1:], sched.dists)) + [(bps[-1], math.inf, sched.tail)]
    log_s = 0.0
    nxt = np.zeros(qtilde.shape[1])
    cost = np.zeros(costs.shape[0])
    for start, end, mu in segs:
        if start >= horizon:
            break
        end = min(end, horizon)
        r = float(rates @ mu)
        jump, crate = mu @ qtilde, costs @ mu
        if r == 0 and math.isinf(end):
            return nxt, cost, math.exp(log_s)

        def surv(t, start=start, r=r, log_s=log_s):
            return math.exp(log_s - r * (t - start))

        mass = quad(surv, start, end, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        nxt += mass * jump
        cost += mass * crate
        log_s -= r * (end - start) if not math.isinf(end) else math.inf
    return nxt, cost, math.exp(log_s)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_piecewise_closed_form_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    mgo = reduce_model(random_model(rng))
    x = int(rng.integers(mgo.n_states))
    sched = random_schedule(rng, mgo, x)
    law = go_jump_law(mgo, x, sched)
    nxt, cost, surv = _quad_oracle(sched, mgo.rates[x], mgo.qtilde[x], mgo.c[:, x])
    assert np.allclose(law.next, nxt, rtol=0, atol=1e-9)
    assert law.absorb == pytest.approx(surv, abs=1e-9)
    if surv == 0:
        assert np.allclose(law.sojourn_cost, cost, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_planned_impulse_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, n_impulse=int(rng.integers(1, 4)), mask_prob=0.0)
    mgo = reduce_model(m)
    x = int(rng.integers(m.n_states))
    sched = random_schedule(rng, mgo, x)
    grad = TimeSchedule(sched.durations, np.ones((sched.durations.size, m.n_gradual)) / m.n_gradual,
                        np.ones(m.n_gradual) / m.n_gradual)
    c_hat = float(rng.uniform(0.0, 3.0))
    beta = rng.dirichlet(np.ones(m.n_impulse))
    law = gi_jump_law(m, x, c_hat, beta, grad)
    nxt, cost, surv = _quad_oracle(grad, m.rates[x], m.qtilde[x], m.cG[:, x], horizon=c_hat)
    nxt = nxt + surv * (beta @ m.Q[x])
    cost = cost + surv * (m.cI[:, x] @ beta)
    assert np.allclose(law.next, nxt, rtol=0, atol=1e-9)
    assert np.allclose(law.sojourn_cost, cost, rtol=0, atol=1e-9)
    assert law.absorb == 0.0


def test_pseudo_constant_kernel_example(example_go):
    p = constant_pseudo_kernel(example_go, 0, [0.5, 0.5], 1.0)
    assert np.allclose(p, [2 / 3, 1 / 3], rtol=1e-15)
    law = pseudo_jump_law(example_go, KernelSeries.constant(p), 0, 1.0)
    assert np.allclose(law.next, [0, 1, 0, 0], atol=1e-12)
    assert np.allclose(law.sojourn_cost, [0.5, 1.0], atol=1e-12)
    assert law.trunc_error < 1e-12


def test_pseudo_pure_impulse_single_term(example_go):
    law = pseudo_jump_law(example_go, KernelSeries.constant([0.0, 1.0]), 0, 1.0)
    assert np.array_equal(law.next, [0, 1, 0, 0])
    assert np.array_equal(law.sojourn_cost, [0.0, 2.0])
    assert law.trunc_error == 0.0


def test_pseudo_idle_kernel_absorbs(example_go):
    law = pseudo_jump_law(example_go, KernelSeries.constant([1.0, 0.0]), 1, 1.0)
    assert law.absorb == 1.0 and np.array_equal(law.sojourn_cost, [0.0, 0.0])


def test_pseudo_slow_contraction_diverges():
    m = random_model(np.random.default_rng(5), n_states=2, n_gradual=1, n_impulse=0,
                     zero_rate_prob=0.0, mask_prob=0.0)
    q = m.q * 1e-9 / m.rates.max()
    slow = type(m)(m.states, m.gradual_actions, m.impulse_actions, q, m.Q, m.cG, m.cI,
                   m.bounds, m.x0, m.admissible)
    mgo = reduce_model(slow)
    with pytest.raises(Diverges) as err:
        pseudo_jump_law(mgo, KernelSeries.constant([1.0]), 0, 1.0)
    assert err.value.state == "s0"


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 1.0, 4.0]))
def test_pseudo_and_poisson_laws_match_markov_law(seed, lam):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    mgo = reduce_model(m)
    probs = np.zeros((mgo.n_states, mgo.n_actions))
    for x in range(m.n_states):
        adm = np.flatnonzero(mgo.admissible[x])
        k = int(rng.integers(1, adm.size + 1))
        probs[x, rng.choice(adm, k, replace=False)] = 0.05 + rng.dirichlet(np.ones(k))
        probs[x] /= probs[x].sum()
    pp = build_pseudo_policy(mgo, MarkovPolicy.constant(probs), lam=lam)
    ps = build_poisson_strategy(m, pp)
    for x in range(m.n_states):
        base = go_jump_law(mgo, x, probs[x])
        assert np.allclose(pp.tail[x].tail, constant_pseudo_kernel(mgo, x, probs[x], lam))
        pseudo = pseudo_jump_law(mgo, pp.tail[x], x, lam)
        assert law_gap(base, pseudo) <= 1e-8 + pseudo.trunc_error
        k = ps.tail[x]
        pois = poisson_jump_law(m, k.grad, k.cont, k.imp, x, lam)
        assert law_gap(pseudo, pois) <= 1e-8 + pseudo.trunc_error + pois.trunc_error


def test_poisson_from_example_kernel(example, example_go):
    pseudo = pseudo_jump_law(example_go, KernelSeries.constant([2 / 3, 1 / 3]), 0, 1.0)
    pois = poisson_jump_law(example, KernelSeries.constant([1.0]), KernelSeries.constant(2 / 3),
                            KernelSeries.constant([1.0]), 0, 1.0)
    assert law_gap(pseudo, pois) <= 1e-10


def test_poisson_impulse_at_time_zero(example):
    law = poisson_jump_law(example, KernelSeries.constant([1.0]), KernelSeries.constant(0.0),
                           KernelSeries.constant([1.0]), 0, 1.0)
    assert np.array_equal(law.next, [0, 1, 0, 0])
    assert np.array_equal(law.sojourn_cost, [0.0, 2.0])


def test_poisson_pure_gradual(example):
    law = poisson_jump_law(example, KernelSeries.constant([1.0]), KernelSeries.constant(1.0),
                           KernelSeries.constant([1.0]), 0, 2.0)
    assert np.allclose(law.next, [0, 1, 0, 0], atol=1e-12)
    assert np.allclose(law.sojourn_cost, [1.0, 0.0], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_law_mass_is_one(seed):
    rng = np.random.default_rng(seed)
    mgo = reduce_model(random_model(rng))
    for x in range(mgo.n_states):
        law = go_jump_law(mgo, x, random_schedule(rng, mgo, x))
        total = law.mass
        assert 1 - 1e-10 - law.trunc_error <= total <= 1 + 1e-10


def test_mix_laws():
    a = JumpLaw(np.array([1.0, 0.0]), 0.0, np.array([1.0]), 1.0, 0.0)
    b = JumpLaw(np.array([0.0, 0.0]), 1.0, np.array([math.inf]), math.inf, 0.0)
    mix = mix_laws([(0.25, a), (0.75, b)])
    assert mix.absorb == 0.75 and mix.sojourn_cost[0] == math.inf
    assert mix.next[0] == 0.25
