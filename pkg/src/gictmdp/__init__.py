"""Constrained gradual-impulsive CTMDPs on finite instances.

Exact one-step laws and total costs, the reduction to a gradual-only model, the
occupation-measure LP, the Poisson-type replication chain and Monte Carlo checks.
"""
from .bellman import BellmanResult, EvaluationResult, compute_vstar, evaluate_policy, evaluate_strategy
from .dynamics import JumpLaw, KernelSeries, gi_jump_law, go_jump_law, poisson_jump_law, pseudo_jump_law
from .errors import (
    Diverges,
    InfeasibleProblem,
    NotFound,
    NumericalFailure,
    TrivialProblem,
    UnboundedProblem,
    Unconverged,
    ValidationError,
    ZenoDetected,
)
from .lp import (
    LPSolution,
    OccupationLP,
    build_occupation_lp,
    extract_policy,
    solve_constrained_problem,
    solve_simplex,
)
from .model import (
    GradualImpulsiveModel,
    MarkovPolicy,
    StandardModel,
    StationaryPolicy,
    StationaryStrategy,
    TimeSchedule,
    ValidationReport,
    builtin_model,
    validate_gi_model,
)
from .poisson import PoissonStrategy, PseudoPoissonPolicy, build_poisson_strategy, build_pseudo_policy
from .reduction import LiftOptions, lift_stationary_policy, reduce_model

__version__ = "0.1.0"
