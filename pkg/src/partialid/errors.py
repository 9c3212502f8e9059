"""Exception hierarchy shared across the package.

Three broad failure classes map onto CLI exit codes: invalid input (2),
data contradicting the maintained assumptions (3), and numeric failure (4).
"""

from __future__ import annotations


class PartialIdError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(PartialIdError):
    """Malformed or invariant-violating input (bad file, negative count, ...)."""


class InfeasibilityError(PartialIdError):
    """The observed data contradict the maintained assumptions.

    This is a *finding*, not a bug: a testable implication of the assumption
    set failed, so the requested bounds do not exist under those assumptions.
    """


class InfeasibleProgramError(InfeasibilityError):
    """Linear program has an empty feasible region.

    Attributes
    ----------
    residuals : list of (label, float)
        Per-constraint residuals at the phase-1 optimum, identifying which
        observed margins cannot be matched.
    """

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class MonotonicityError(InfeasibilityError):
    """Observed data violate a testable implication of a monotonicity assumption."""


class EmptyStateSpaceError(InfeasibilityError):
    """Assumption flags jointly remove every latent response type."""


class NumericError(PartialIdError):
    """Numerical failure (non-convergence, degenerate design, separation)."""


class OptimizationError(NumericError):
    """An optimizer failed to converge."""


class SeparationError(NumericError):
    """A fitted probability model is separated (single-valued treatment)."""


class DegenerateDesignError(NumericError):
    """A regression design matrix carries no information about the target."""
