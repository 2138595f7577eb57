import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import half_half, law_gap
from gictmdp import GradualImpulsiveModel, StationaryPolicy, evaluate_policy, evaluate_strategy
from gictmdp.bellman import stationary_strategy_laws
from gictmdp.corpus import lift_conflict, random_model, random_policy
from gictmdp.dynamics import go_jump_law
from gictmdp.errors import ValidationError
from gictmdp.model import validate_standard_model
from gictmdp.reduction import (
    LiftOptions,
    deterministic_policy,
    lift_stationary_policy,
    positive_exit_weight,
    reduce_model,
)


def test_example_reduction(example_go):
    assert example_go.actions == ("a", "b")
    assert list(example_go.is_impulse) == [False, True]
    assert example_go.q[0, 1, 0] == -1.0 and example_go.q[0, 1, 1] == 1.0
    assert example_go.q[0, 1, 2:].sum() == 0.0
    assert example_go.c[1, 0, 1] == 2.0 and example_go.c[0, 0, 0] == 1.0
    # impulse disabled at the last state: no rate there
    assert not example_go.q[3, 1].any()


def test_smoke_reduction(smoke):
    mgo = reduce_model(smoke)
    assert np.array_equal(mgo.q, smoke.q)
    assert not mgo.is_impulse.any()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reduction_shape_and_validity(seed):
    m = random_model(np.random.default_rng(seed))
    mgo = reduce_model(m)
    assert mgo.n_actions == m.n_gradual + m.n_impulse
    assert mgo.is_impulse.sum() == m.n_impulse
    assert validate_standard_model(mgo).passed
    adm_i = m.admissible[:, m.n_gradual:]
    assert np.all(mgo.rates[:, m.n_gradual:][adm_i] == 1.0)


def test_lift_example(example, example_go):
    s = lift_stationary_policy(half_half(example_go), example)
    assert s.w_imp[0] == 0.5
    assert s.beta[0, 0] == 1.0 and s.f_hat[0, 0] == 1.0
    assert np.all(s.w_imp[1:] == 0)


def test_lift_pure_gradual():
    m = random_model(np.random.default_rng(3), n_states=3, n_gradual=2, n_impulse=1,
                     zero_rate_prob=0.0, mask_prob=0.0)
    assert np.all(m.rates[:, 1] > 0)
    probs = np.zeros((3, 3))
    probs[:, 0], probs[:, 1] = 0.25, 0.75
    s = lift_stationary_policy(StationaryPolicy(probs), m)
    assert np.all(s.w_imp == 0.0)
    assert np.allclose(s.f_hat, [0.25, 0.75])


def test_lift_pure_impulse(example):
    probs = np.array([[0, 1], [1, 0], [1, 0], [1, 0]], float)
    s = lift_stationary_policy(StationaryPolicy(probs), example)
    assert s.w_imp[0] == 1.0 and s.beta[0, 0] == 1.0
    assert s.f_hat[0, 0] == 1.0        # default fills the unused gradual branch


def test_positive_exit_weight(example, example_go):
    D = positive_exit_weight(example, half_half(example_go).probs)
    assert np.allclose(D, [1.0, 0, 0, 0])


def test_lift_rejects_inadmissible(example):
    probs = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], float)
    with pytest.raises(ValidationError):
        lift_stationary_policy(StationaryPolicy(probs), example)


def test_deterministic_policy(example_go):
    pol = deterministic_policy(example_go, ["b", "a", "a", "a"])
    assert pol.probs[0, 1] == 1.0 and pol.probs[1:, 0].all()


def _laws_agree(m, pol, opts=None):
    mgo = reduce_model(m)
    s = lift_stationary_policy(pol, m, opts)
    lifted = stationary_strategy_laws(m, s)
    return max(law_gap(go_jump_law(mgo, x, pol.probs[x]), lifted[x]) for x in range(m.n_states))


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lift_replicates_jump_laws(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    pol = random_policy(rng, m)
    assert _laws_agree(m, pol) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lift_defaults_do_not_matter(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, mask_prob=0.0)
    pol = random_policy(rng, m)
    p_star = np.zeros(m.n_gradual)
    p_star[-1] = 1.0
    opts = LiftOptions(p_star=p_star, p_star_star=np.full(m.n_impulse, 1.0 / max(m.n_impulse, 1))
                       if m.n_impulse else None)
    assert _laws_agree(m, pol, opts) <= 1e-10


def _conflict_model():
    # state 0: gradual action at rate 0 with running cost 1, impulse to state 1 for free
    q = np.zeros((2, 1, 2))
    Q = np.zeros((2, 1, 2))
    Q[0, 0, 1] = 1.0
    cG = np.zeros((1, 2, 1))
    cG[0, 0, 0] = 1.0
    adm = np.array([[True, True], [True, False]])
    return GradualImpulsiveModel(["0", "1"], ["a"], ["b"], q, Q, cG, np.zeros((1, 2, 1)),
                                 [], 0, adm)


def test_idle_costly_gradual_mass_next_to_impulses_is_not_replicated():
    """Zero exit rate from gradual actions, impulse mass and a paid idle gradual action.

    The reduced model spends an Exp(D) sojourn paying the idle cost before the impulse
    fires; the stationary lift impulses at once and pays nothing. The suite's random
    policies exclude this configuration.
    """
    m = _conflict_model()
    mgo = reduce_model(m)
    pol = StationaryPolicy([[0.5, 0.5], [1.0, 0.0]])
    assert lift_conflict(m, pol.probs).tolist() == [True, False]
    s = lift_stationary_policy(pol, m)
    assert s.w_imp[0] == 1.0
    reduced = evaluate_policy(mgo, pol).W[0]
    lifted = evaluate_strategy(m, s).W[0]
    assert reduced == pytest.approx(1.0, abs=1e-12)    # 2 expected time units at rate 1/2
    assert lifted == 0.0
    # the jump targets still agree; only the sojourn cost differs
    law_go = go_jump_law(mgo, 0, pol.probs[0])
    law_m = stationary_strategy_laws(m, s)[0]
    assert np.allclose(law_go.next, law_m.next)
    assert law_go.sojourn_cost[0] - law_m.sojourn_cost[0] == pytest.approx(1.0)


def test_free_idle_gradual_mass_next_to_impulses_is_replicated():
    m = _conflict_model()
    cG = np.zeros((1, 2, 1))
    m = GradualImpulsiveModel(m.states, m.gradual_actions, m.impulse_actions, m.q, m.Q, cG,
                              m.cI, [], 0, m.admissible)
    pol = StationaryPolicy([[0.5, 0.5], [1.0, 0.0]])
    assert not lift_conflict(m, pol.probs).any()
    assert _laws_agree(m, pol) <= 1e-12
