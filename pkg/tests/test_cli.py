import io
import json
import subprocess
import sys

import numpy as np
import pytest

from gictmdp import reduce_model
from gictmdp.cli import run
from gictmdp.model import model_from_dict, standard_model_from_dict


def _run(*argv):
    buf = io.StringIO()
    code = run([str(a) for a in argv], out=buf)
    return code, json.loads(buf.getvalue())


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def files(tmp_path):
    code, model = _run("example")
    assert code == 0
    half = {"0": {"a": 0.5, "b": 0.5}, "1": {"a": 1.0}, "2": {"a": 1.0}, "3": {"a": 1.0}}
    sigma = {"0": {"w_imp": 0.5, "beta": {"b": 1.0}, "f_hat": {"a": 1.0}}}
    sigma.update({x: {"w_imp": 0.0, "f_hat": {"a": 1.0}} for x in "123"})
    return {
        "model": _write(tmp_path / "example.json", model),
        "half": _write(tmp_path / "half.json", half),
        "sigma": _write(tmp_path / "sigma.json", sigma),
        "dir": tmp_path,
    }


def test_example_round_trips(files):
    m = model_from_dict(json.loads(files["model"].read_text()))
    assert m.states == ("0", "1", "2", "3") and m.n_impulse == 1


def test_validate_ok_and_broken(files):
    code, rep = _run("validate", files["model"])
    assert code == 0 and rep["results"]["pass"] and rep["exit_code"] == 0
    broken = json.loads(files["model"].read_text())
    broken["bounds"] = [1.0, 2.0]
    code, rep = _run("validate", _write(files["dir"] / "broken.json", broken))
    assert code == 1 and rep["results"]["pass"] is False
    assert rep["results"]["entries"]


def test_invalid_json_is_validation_failure(files):
    bad = files["dir"] / "bad.json"
    bad.write_text("{not json")
    assert _run("validate", bad)[0] == 1


def test_reduce_re_parses(files):
    code, rep = _run("reduce", files["model"])
    assert code == 0
    mgo = standard_model_from_dict(rep["results"])
    ref = reduce_model(model_from_dict(json.loads(files["model"].read_text())))
    assert np.allclose(mgo.qtilde, ref.qtilde) and np.allclose(mgo.c, ref.c)


def test_bellman(files):
    code, rep = _run("bellman", files["model"], "--epsilon", 0.5)
    res = rep["results"]
    assert code == 0 and res["R"] == ["0"]
    assert res["v"]["0"] == pytest.approx(1.0) and res["v"]["1"] == 0.0
    assert rep["config"]["epsilon"] == 0.5


def test_lp_solve(files):
    code, rep = _run("lp-solve", files["model"])
    res = rep["results"]
    assert code == 0
    assert res["value"] == pytest.approx(0.5)
    assert res["strategy"]["0"]["w_imp"] == pytest.approx(0.5)
    assert res["check"]["status"] == "PASS" and res["check"]["tol"] == 1e-7
    assert res["nu"]["0/a"] == pytest.approx(0.5) and res["nu"]["0/b"] == pytest.approx(0.5)


def test_lp_solve_infeasible(files):
    m = json.loads(files["model"].read_text())
    m["bounds"] = [-1.0]
    code, rep = _run("lp-solve", _write(files["dir"] / "neg.json", m))
    assert code == 2 and rep["error"]["kind"] == "InfeasibleProblem"


def test_evaluate_policy_and_strategy(files):
    code, rep = _run("evaluate", files["model"], "--policy", files["half"])
    assert code == 0 and np.allclose(rep["results"]["W"], [0.5, 1.0])
    code, rep = _run("evaluate", files["model"], "--strategy", files["sigma"])
    assert code == 0 and np.allclose(rep["results"]["W"], [0.5, 1.0])
    assert _run("evaluate", files["model"])[0] == 4


def test_simulate(files):
    code, rep = _run("simulate", files["model"], "--strategy", files["sigma"],
                     "--episodes", 5000, "--seed", 3)
    res = rep["results"]
    assert code == 0 and res["exact"] == [0.5, 1.0] and all(res["within_3se"])
    code2, rep2 = _run("simulate", files["model"], "--strategy", files["sigma"],
                       "--episodes", 5000, "--seed", 3)
    assert rep2["results"]["mean"] == res["mean"]
    code, rep = _run("simulate", files["model"], "--markov", files["half"], "--episodes", 5000)
    assert code == 0 and all(rep["results"]["within_3se"])


def test_replicate_all_pass(files):
    code, rep = _run("replicate", files["model"], "--markov", files["half"])
    res = rep["results"]
    assert code == 0
    assert res["pass"] == {"laws": True, "W": True, "monte_carlo": True}
    assert len(res["laws"]) == 4 and all(l["pass"] for l in res["laws"])


def test_replicate_piecewise_schedule(files):
    mk = {"epochs": [], "tail": {
        "0": {"segments": [[1.0, {"a": 1.0}]], "tail": {"b": 1.0}},
        "1": {"a": 1.0}, "2": {"a": 1.0}, "3": {"a": 1.0}}}
    code, rep = _run("replicate", files["model"], "--markov", _write(files["dir"] / "mk.json", mk),
                     "--episodes", 5000, "--lambda", 2.0)
    assert code == 0 and all(rep["results"]["pass"].values())
    assert rep["results"]["W"]["markov"][0] == pytest.approx(1 - np.exp(-1))


def test_usage_errors(files):
    code, rep = _run("frobnicate")
    assert code == 4 and rep["error"]["kind"] == "usage"
    assert _run()[0] == 4
    assert _run("validate", files["dir"] / "missing.json")[0] == 4
    assert _run("bellman", files["model"], "--epsilon", "x")[0] == 4


def test_console_entry_point(files):
    out = subprocess.run([sys.executable, "-m", "gictmdp.cli", "validate", str(files["model"])],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0
    rep = json.loads(out.stdout)
    assert rep["command"][0] == "validate" and "wall_time" in rep
