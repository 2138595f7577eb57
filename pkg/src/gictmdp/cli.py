"""Command-line interface; every command prints one JSON report on stdout.

Exit codes: 0 success, 1 validation failure, 2 infeasible or unbounded problem,
3 numerical failure, 4 usage error.
"""
import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .bellman import compute_vstar, evaluate_policy, evaluate_strategy
from .dynamics import go_jump_law, poisson_jump_law, pseudo_jump_law
from .errors import (
    Diverges,
    InfeasibleProblem,
    NotFound,
    NumericalFailure,
    UnboundedProblem,
    Unconverged,
    ValidationError,
    ZenoDetected,
)
from .lp import solve_constrained_problem
from .model import (
    MarkovPolicy,
    TimeSchedule,
    builtin_model,
    dumps,
    model_from_dict,
    model_to_dict,
    policy_from_dict,
    policy_to_dict,
    standard_model_to_dict,
    strategy_from_dict,
    strategy_to_dict,
    validate_gi_model,
)
from .poisson import build_poisson_strategy, build_pseudo_policy
from .reduction import reduce_model
from .sim import SimConfig, simulate_policy, simulate_strategy

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def _nums(arr):
    return [_num(v) for v in np.ravel(arr)]


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _load_model(path):
    return model_from_dict(_read_json(path))


def _schedule_from(mgo, spec):
    def dist(d):
        v = np.zeros(mgo.n_actions)
        for a, p in d.items():
            v[mgo.action_index(a)] = float(p)
        return v
    if isinstance(spec, dict) and "segments" in spec:
        segs = spec["segments"]
        durs = [float(s[0]) for s in segs]
        dists = [dist(s[1]) for s in segs]
        return TimeSchedule(durs, np.array(dists).reshape(len(durs), mgo.n_actions),
                            dist(spec["tail"]))
    return TimeSchedule.constant(dist(spec))


def markov_from_dict(mgo, d):
    """Markov policy file: ``{state: {action: prob}}`` for a constant policy, or
    ``{"epochs": [{state: schedule}, ...], "tail": {state: schedule}}`` where a
    schedule is a distribution or ``{"segments": [[duration, dist], ...], "tail": dist}``."""
    def row(block):
        out = [None] * mgo.n_states
        for xs, spec in block.items():
            out[mgo.state_index(xs)] = _schedule_from(mgo, spec)
        if any(s is None for s in out):
            raise ValidationError("Markov policy must give a schedule for every state")
        return tuple(out)
    if "tail" in d and isinstance(d.get("tail"), dict) and "epochs" in d:
        return MarkovPolicy(tuple(row(e) for e in d["epochs"]), row(d["tail"]))
    return MarkovPolicy((), row(d))


def _law_close(a, b, tol):
    with np.errstate(invalid="ignore"):
        da = np.abs(a.next - b.next).max(initial=0.0)
        dabs = abs(a.absorb - b.absorb)
        ca, cb = a.sojourn_cost, b.sojourn_cost
        both_inf = np.isinf(ca) & np.isinf(cb)
        dc = np.where(both_inf, 0.0, np.abs(ca - cb)).max(initial=0.0)
    return bool(max(da, dabs, dc) <= tol + a.trunc_error + b.trunc_error)


def _W_close(a, b, tol):
    both_inf = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        return bool(np.all(both_inf | (np.abs(a - b) <= tol)))


# ---------------------------------------------------------------- commands

def cmd_validate(args):
    m_dict = _read_json(args.model)
    try:
        m = model_from_dict(m_dict)
    except ValidationError as exc:
        return EXIT_VALIDATION, {"pass": False, "entries": [
            {"severity": "error", "location": "file", "message": str(exc)}]}
    rep = validate_gi_model(m)
    return (EXIT_OK if rep.passed else EXIT_VALIDATION), rep.to_dict()


def cmd_reduce(args):
    m = _load_model(args.model)
    return EXIT_OK, standard_model_to_dict(reduce_model(m))


def cmd_bellman(args):
    m = _load_model(args.model)
    mgo = reduce_model(m)
    res = compute_vstar(mgo, args.epsilon, args.tol, args.max_iter)
    return EXIT_OK, {
        "v": {m.states[x]: _num(v) for x, v in enumerate(res.v)},
        "R": [m.states[x] for x in res.R],
        "f_star": {m.states[x]: mgo.actions[a] for x, a in enumerate(res.f_star)},
        "iterations": res.iterations,
        "residual": _num(res.residual),
    }


def cmd_lp_solve(args):
    m = _load_model(args.model)
    mgo = reduce_model(m)
    res = solve_constrained_problem(m, args.epsilon, args.tol, args.check_tol)
    out = {"value": _num(res.value), "trivial": res.trivial}
    if res.solution is not None:
        sol = res.solution
        tab = sol.table()
        out["nu"] = {f"{m.states[x]}/{mgo.actions[a]}": _num(tab[x, a]) for (x, a) in sol.lp.columns}
        out["balance_residual"] = _num(sol.balance_residual)
        out["slacks"] = _nums(sol.slacks)
        out["basis"] = [list(map(str, b)) for b in sol.basis]
    out["R"] = [m.states[x] for x in res.bellman.R]
    out["policy"] = policy_to_dict(mgo, res.policy)
    out["strategy"] = strategy_to_dict(m, res.strategy)
    chk = dict(res.check)
    chk["W"] = _nums(chk["W"])
    chk["status"] = "PASS" if chk["pass"] else "FAIL"
    out["check"] = chk
    return (EXIT_OK if chk["pass"] else EXIT_NUMERICAL), out


def _eval_dict(m, ev, states):
    return {
        "W": _nums(ev.W),
        "w": [{states[x]: _num(v) for x, v in enumerate(row)} for row in ev.w],
        "trunc_error": _num(ev.trunc_error),
        "method": ev.diagnostics.get("method"),
    }


def cmd_evaluate(args):
    m = _load_model(args.model)
    mgo = reduce_model(m)
    if bool(args.policy) == bool(args.strategy):
        raise UsageError("give exactly one of --policy or --strategy")
    if args.policy:
        pol = policy_from_dict(mgo, _read_json(args.policy))
        ev = evaluate_policy(mgo, pol, method=args.method)
    else:
        s = strategy_from_dict(m, _read_json(args.strategy))
        ev = evaluate_strategy(m, s, method=args.method)
    return EXIT_OK, _eval_dict(m, ev, m.states)


def _sim_config(args):
    return SimConfig(episodes=args.episodes, seed=args.seed, max_jumps=args.max_jumps,
                     time_horizon=args.horizon, max_impulse_chain=args.max_impulse_chain,
                     lam=args.lam)


def cmd_simulate(args):
    m = _load_model(args.model)
    mgo = reduce_model(m)
    cfg = _sim_config(args)
    given = [a for a in (args.strategy, args.policy, args.markov) if a]
    if len(given) != 1:
        raise UsageError("give exactly one of --strategy, --policy or --markov")
    if args.strategy:
        s = strategy_from_dict(m, _read_json(args.strategy))
        est, exact = simulate_strategy(m, s, cfg=cfg), evaluate_strategy(m, s).W
    elif args.policy:
        pol = policy_from_dict(mgo, _read_json(args.policy))
        est, exact = simulate_policy(mgo, pol, cfg=cfg), evaluate_policy(mgo, pol).W
    else:
        mk = markov_from_dict(mgo, _read_json(args.markov))
        ps = build_poisson_strategy(m, build_pseudo_policy(mgo, mk, args.lam))
        est, exact = simulate_strategy(m, ps, cfg=cfg), evaluate_strategy(m, ps).W
    out = est.to_dict()
    out["mean"], out["se"] = _nums(est.mean), _nums(est.se)
    out["exact"] = _nums(exact)
    out["within_3se"] = [bool(v) for v in est.covers(exact)]
    return EXIT_OK, out


def cmd_replicate(args):
    m = _load_model(args.model)
    mgo = reduce_model(m)
    mk = markov_from_dict(mgo, _read_json(args.markov))
    pp = build_pseudo_policy(mgo, mk, args.lam)
    ps = build_poisson_strategy(m, pp)
    tol = args.tol
    laws = []
    laws_ok = True
    for e in range(mk.n_epochs + 1):
        for x in range(m.n_states):
            la = go_jump_law(mgo, x, mk.schedule(e, x))
            lb = pseudo_jump_law(mgo, pp.kernels(e, x), x, args.lam)
            k = ps.kernels(e, x)
            lc = poisson_jump_law(m, k.grad, k.cont, k.imp, x, args.lam)
            ok = _law_close(la, lb, tol) and _law_close(la, lc, tol)
            laws_ok &= ok
            laws.append({
                "epoch": e if e < mk.n_epochs else "tail",
                "state": m.states[x],
                "markov": la.to_dict(list(m.states)),
                "pseudo": lb.to_dict(list(m.states)),
                "poisson": lc.to_dict(list(m.states)),
                "pass": ok,
            })
    Wm = evaluate_policy(mgo, mk)
    Wp = evaluate_policy(mgo, pp)
    Ws = evaluate_strategy(m, ps)
    wtol = tol + Wp.trunc_error + Ws.trunc_error
    W_ok = _W_close(Wm.W, Wp.W, wtol) and _W_close(Wm.W, Ws.W, wtol)
    cfg = _sim_config(args)
    mc = {
        "markov": simulate_policy(mgo, mk, cfg=cfg),
        "pseudo": simulate_policy(mgo, pp, cfg=cfg),
        "poisson": simulate_strategy(m, ps, cfg=cfg),
    }
    mc_out = {}
    mc_ok = True
    for name, est in mc.items():
        cov = [bool(v) for v in est.covers(Wm.W)]
        mc_ok &= all(cov)
        d = est.to_dict()
        d["mean"], d["se"] = _nums(est.mean), _nums(est.se)
        d["within_3se"] = cov
        mc_out[name] = d
    out = {
        "lambda": args.lam,
        "laws": laws,
        "W": {"markov": _nums(Wm.W), "pseudo": _nums(Wp.W), "poisson": _nums(Ws.W)},
        "trunc_error": {"pseudo": _num(Wp.trunc_error), "poisson": _num(Ws.trunc_error)},
        "monte_carlo": mc_out,
        "pass": {"laws": bool(laws_ok), "W": bool(W_ok), "monte_carlo": bool(mc_ok)},
    }
    ok = laws_ok and W_ok and mc_ok
    return (EXIT_OK if ok else EXIT_NUMERICAL), out


def cmd_example(args):
    return EXIT_OK, model_to_dict(builtin_model("paper-example", args.states))


def build_parser():
    p = _Parser(prog="gictmdp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def model_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("model", help="model JSON file")
        return s

    model_cmd("validate", "check model invariants")
    model_cmd("reduce", "emit the gradual-only reduced model")
    s = model_cmd("bellman", "compute v*, R and f*")
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=1_000_000)
    s = model_cmd("lp-solve", "solve the constrained problem end to end")
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--check-tol", type=float, default=1e-7)
    s = model_cmd("evaluate", "exact total costs of a policy or strategy")
    s.add_argument("--policy")
    s.add_argument("--strategy")
    s.add_argument("--method", choices=["direct", "iterate"], default="direct")

    def sim_flags(s, episodes):
        s.add_argument("--episodes", type=int, default=episodes)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--lambda", dest="lam", type=float, default=1.0)
        s.add_argument("--max-jumps", type=int, default=100_000)
        s.add_argument("--horizon", type=float, default=math.inf)
        s.add_argument("--max-impulse-chain", type=int, default=10_000)

    s = model_cmd("simulate", "Monte Carlo estimate of total costs")
    s.add_argument("--strategy")
    s.add_argument("--policy")
    s.add_argument("--markov", help="Markov policy; simulates its Poisson-related strategy")
    sim_flags(s, 100_000)
    s = model_cmd("replicate", "check the Markov / pseudo-Poisson / Poisson chain")
    s.add_argument("--markov", required=True)
    s.add_argument("--tol", type=float, default=1e-7)
    sim_flags(s, 20_000)
    s = sub.add_parser("example", help="emit the builtin example model")
    s.add_argument("--states", type=int, default=4)
    return p


COMMANDS = {
    "validate": cmd_validate,
    "reduce": cmd_reduce,
    "bellman": cmd_bellman,
    "lp-solve": cmd_lp_solve,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "replicate": cmd_replicate,
    "example": cmd_example,
}


def _config(args):
    return {k: (_num(v) if isinstance(v, float) else v)
            for k, v in sorted(vars(args).items()) if k != "command"}


def run(argv, out=None):
    """Run one command; writes the JSON report and returns the exit code."""
    out = out or sys.stdout
    start = time.perf_counter()
    argv = list(argv)
    report = {"command": argv, "version": __version__}
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand")
        report["config"] = _config(args)
        if args.command == "example":
            # the model itself is the output so it can be piped straight to a file
            code, results = cmd_example(args)
            out.write(dumps(results))
            return code
        code, results = COMMANDS[args.command](args)
        report["results"] = results
    except UsageError as exc:
        code, report["error"] = EXIT_USAGE, {"kind": "usage", "message": str(exc)}
    except (ValidationError, NotFound) as exc:
        code, report["error"] = EXIT_VALIDATION, {"kind": "validation", "message": str(exc)}
    except (InfeasibleProblem, UnboundedProblem) as exc:
        code, report["error"] = EXIT_INFEASIBLE, {"kind": type(exc).__name__, "message": str(exc)}
    except (NumericalFailure, Unconverged, Diverges, ZenoDetected) as exc:
        code, report["error"] = EXIT_NUMERICAL, {"kind": type(exc).__name__, "message": str(exc)}
    report["exit_code"] = code
    report["wall_time"] = time.perf_counter() - start
    out.write(dumps(report))
    return code


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
