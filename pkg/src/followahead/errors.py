"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Bad shapes, out-of-range parameters, malformed files."""


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf or hit a singular matrix."""


class InfeasibleStart(RuntimeError):
    """Planner start state is in collision."""


class NoFeasiblePlan(RuntimeError):
    """Every action sequence from the start state has infinite cost."""
