import math

import numpy as np
import pytest

from gictmdp import StationaryPolicy, builtin_model, evaluate_strategy, reduce_model
from gictmdp.errors import ZenoDetected


def law_gap(a, b):
    """Sup distance between two jump laws; inf when their infinite costs disagree."""
    d = max(float(np.max(np.abs(a.next - b.next), initial=0.0)), abs(a.absorb - b.absorb))
    for u, v in zip(a.sojourn_cost, b.sojourn_cost):
        if math.isinf(u) or math.isinf(v):
            if u != v:
                return math.inf
        else:
            d = max(d, abs(u - v))
    return d


def value_gap(a, b):
    """Sup distance between cost arrays that may contain inf."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(np.isinf(a) != np.isinf(b)):
        return math.inf
    fin = ~np.isinf(a)
    return float(np.max(np.abs(a[fin] - b[fin]), initial=0.0))


def half_half(mgo):
    """The mixed policy of the example: (1/2, 1/2) at state 0, gradual elsewhere."""
    probs = np.zeros((mgo.n_states, mgo.n_actions))
    probs[:, 0] = 1.0
    probs[0] = [0.5, 0.5]
    return StationaryPolicy(probs)


@pytest.fixture
def example():
    return builtin_model("paper-example")


@pytest.fixture
def example_go(example):
    return reduce_model(example)


@pytest.fixture
def smoke():
    return builtin_model("two-state-smoke")


def strategy_values(m, s, ref_w):
    """Cost-to-go of a strategy, or None for a reported costly Zeno cycle.

    A cycle of immediate impulses is only acceptable where the reference values of the
    reduced model are infinite on every cycle state.
    """
    try:
        return evaluate_strategy(m, s)
    except ZenoDetected as err:
        idx = [m.states.index(name) for name in err.states]
        assert np.isinf(np.asarray(ref_w)[:, idx]).any(axis=0).all()
        return None


ACCEPTANCE = []


def record_acceptance(number, title, ok, elapsed, budget, detail=""):
    """Print and keep one PASS/FAIL line for an acceptance criterion."""
    status = "PASS" if ok and elapsed < budget else "FAIL"
    line = f"[{status}] criterion {number}: {title} ({elapsed:.2f} s of {budget:g} s){' ' + detail if detail else ''}"
    print(line)
    ACCEPTANCE.append(line)
    return status == "PASS"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
