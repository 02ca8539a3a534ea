"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FoldFoldError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(FoldFoldError, ValueError):
    """Invalid parameters, schema violations or degenerate geometry."""


class DomainError(FoldFoldError, ValueError):
    """Argument outside the mathematical domain of a function."""


class EvaluationError(FoldFoldError, ArithmeticError):
    """A component function returned a non-finite value."""

    def __init__(self, name: str, value: float):
        super().__init__(f"{name} evaluated to a non-finite value ({value!r})")
        self.name = name
        self.value = value


class PreconditionError(FoldFoldError, ValueError):
    """An operation was called outside its documented preconditions."""


class DerivativeError(FoldFoldError):
    """Finite-difference estimates failed their refined-step cross-check."""


class DegenerateSlidingError(FoldFoldError):
    """Both switching velocities coincide, so the sliding weight is undefined."""


class IntegrationError(FoldFoldError):
    """Generic failure of the numerical integrator."""


class TangencyStallError(IntegrationError):
    """The integrator cannot continue at a point where both fields are tangent."""

    def __init__(self, message: str, t: float, state):
        super().__init__(f"{message} at t={t!r}, state={tuple(state)!r}")
        self.t = t
        self.state = tuple(state)


class RunawayChatterError(IntegrationError):
    """Too many switching events (Zeno-like chatter)."""


class NoReturnError(IntegrationError):
    """The orbit did not return to the switching surface within t_max."""


class TangencyAmbiguityError(IntegrationError):
    """The start point is tangent to the surface and the continuation is ambiguous."""


class DegeneracyError(FoldFoldError):
    """A denominator of the coefficient formulas vanishes."""


class ConsistencyError(FoldFoldError):
    """Two algebraically equal expressions disagree numerically."""

    def __init__(self, name: str, first: float, second: float):
        super().__init__(f"{name}: {first!r} != {second!r}")
        self.name = name
        self.first = first
        self.second = second


class InapplicableError(FoldFoldError):
    """A prediction was requested where the theorem does not apply."""


class GridDesignError(FoldFoldError):
    """The least-squares design matrix of a fit is rank deficient."""


class InsufficientDataError(FoldFoldError):
    """Too few oscillations were recorded to measure a cycle."""


class ConvergenceError(FoldFoldError):
    """An iterative solver failed to converge."""
