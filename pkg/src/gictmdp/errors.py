"""Exception types raised across the package."""


class GictmdpError(Exception):
    """Base class for all package errors."""


class ValidationError(GictmdpError, ValueError):
    """An input model, policy or strategy violates its invariants."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotFound(GictmdpError, KeyError):
    """Unknown builtin model name."""


class Diverges(GictmdpError):
    """A truncated series failed to contract within the term budget."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class Unconverged(GictmdpError):
    """An iteration hit max_iter; the partial result is attached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ZenoDetected(GictmdpError):
    """Immediate impulses can repeat forever while incurring positive cost."""

    def __init__(self, message, states=()):
        super().__init__(message)
        self.states = tuple(states)


class NumericalFailure(GictmdpError):
    """Solver stalled on tiny pivots or quadrature failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrivialProblem(GictmdpError):
    """The initial state lies outside R; the optimal value is 0."""


class InfeasibleProblem(GictmdpError):
    """The constrained problem has no feasible solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class UnboundedProblem(GictmdpError):
    """The occupation LP has an unbounded ray."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
