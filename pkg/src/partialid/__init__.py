"""Bounds and sensitivity analysis for partially identified treatment effects.

Submodules
----------
data         typed counts/laws, file ingestion, validation
ate          ATE bounds under unknown treatment selection
principal    principal-stratum effects, selection-model sensitivity analysis
lp           exact LP engine over latent response types (noncompliance bounds)
mediation    natural direct/indirect effect bounds
msm          longitudinal IPTW estimation and bias-adjustment sweeps
uncertainty  ignorance regions, pointwise/strong uncertainty intervals, bands
cli          command-line front end
"""

__version__ = "0.1.0"

from .data import (Interval, ObservedLaw, StratifiedCounts, Stratum,
                   ThreeVarCounts, TwoArmCounts, empirical_law, load_counts,
                   serialize_counts)
from .errors import (DegenerateDesignError, EmptyStateSpaceError,
                     InfeasibilityError, InfeasibleProgramError,
                     MonotonicityError, NumericError, OptimizationError,
                     PartialIdError, SeparationError, ValidationError)

__all__ = [
    "Interval", "ObservedLaw", "StratifiedCounts", "Stratum", "ThreeVarCounts",
    "TwoArmCounts", "empirical_law", "load_counts", "serialize_counts",
    "PartialIdError", "ValidationError", "InfeasibilityError",
    "InfeasibleProgramError", "MonotonicityError", "EmptyStateSpaceError",
    "NumericError", "OptimizationError", "SeparationError",
    "DegenerateDesignError", "__version__",
]
