"""Average-treatment-effect bounds under unknown treatment selection.

Worst-case (no-assumption) bounds, monotone-treatment-selection (MTS) and
monotone-treatment-response (MTR) bounds, the naive mean-difference
estimator, and a product-form bias adjustment for a postulated binary
unmeasured confounder.  All arithmetic is generic over floats and exact
``Fraction`` inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Collection, Union

from .data import Interval, Number, ObservedLaw, StratifiedCounts, ThreeVarCounts, TwoArmCounts, empirical_law
from .errors import InfeasibilityError, ValidationError


class Assumption(enum.Enum):
    MTS = "mts"
    MTR = "mtr"


@dataclass(frozen=True)
class AteSummary:
    """Arm means E[Y|Z=z] and the treatment prevalence Pr[Z=1].

    Outcomes are assumed rescaled to [0, 1]; binary outcomes satisfy this
    automatically and bounded real outcomes enter as rescaled means.
    """

    mean_y1: Number
    mean_y0: Number
    p1: Number
    n: Union[int, None] = None

    def __post_init__(self):
        if not (0 <= self.mean_y1 <= 1 and 0 <= self.mean_y0 <= 1):
            raise ValidationError(f"arm means ({self.mean_y1}, {self.mean_y0}) outside [0,1]")
        if not (0 < self.p1 < 1):
            raise ValidationError(f"Pr[Z=1]={self.p1} must lie strictly inside (0,1)")

    @property
    def p0(self) -> Number:
        return 1 - self.p1

    @classmethod
    def from_counts(cls, counts: TwoArmCounts, rational: bool = False) -> "AteSummary":
        div = (lambda a, b: Fraction(a, b)) if rational else (lambda a, b: a / b)
        return cls(
            mean_y1=div(counts.n(1, 1), counts.arm_total(1)),
            mean_y0=div(counts.n(1, 0), counts.arm_total(0)),
            p1=div(counts.arm_total(1), counts.total),
            n=counts.total,
        )

    @classmethod
    def from_law(cls, law: ObservedLaw) -> "AteSummary":
        """Y-margin of a three-variable law, discarding S."""
        return cls(mean_y1=law.mean_y(1), mean_y0=law.mean_y(0), p1=law.pz[1], n=law.n)


@dataclass(frozen=True)
class ConfounderScenario:
    """Postulated binary unmeasured confounder U.

    ``gamma0`` is the common outcome shift E[Y(z)|U=1] - E[Y(z)|U=0];
    ``gamma1`` the prevalence contrast Pr[U=1|Z=1] - Pr[U=1|Z=0].
    """

    gamma0: float
    gamma1: float

    def __post_init__(self):
        if not (-1 <= self.gamma0 <= 1 and -1 <= self.gamma1 <= 1):
            raise ValidationError(f"({self.gamma0}, {self.gamma1}) outside [-1,1]^2")


def naive_estimate(s: AteSummary) -> Number:
    """Difference in arm means; consistent for the ATE only under mean independence."""
    return s.mean_y1 - s.mean_y0


def no_assumption_bounds(s: AteSummary) -> Interval:
    """Worst-case ATE bounds: width exactly 1, always containing 0.

    The lower endpoint sets the unobserved counterfactual means to their
    extremes E[Y(1)|Z=0]=0, E[Y(0)|Z=1]=1; the upper endpoint to the
    opposite extremes.
    """
    base = s.mean_y1 * s.p1 - s.mean_y0 * s.p0
    return Interval(base - s.p1, base + s.p0)


def mts_bounds(s: AteSummary) -> Interval:
    """Bounds under monotone treatment selection.

    MTS caps E[Y(1)|Z=0] at E[Y|Z=1] and floors E[Y(0)|Z=1] at E[Y|Z=0],
    so the upper bound collapses to the naive contrast; the lower bound is
    unchanged.  May exclude zero.
    """
    return Interval(no_assumption_bounds(s).lo, naive_estimate(s))


def mtr_bounds(s: AteSummary) -> Interval:
    """Bounds under monotone treatment response: Pr[Y(1) >= Y(0)] = 1."""
    return Interval(0, no_assumption_bounds(s).hi)


def combined_bounds(s: AteSummary, assumptions: Collection[Assumption]) -> Interval:
    """Intersection of the selected assumption-specific bounds.

    An empty intersection is surfaced as :class:`InfeasibilityError`: the
    data contradict the joint assumptions, which is a reportable finding
    rather than something to clamp away.  Sharpness of the intersection is
    not claimed.
    """
    result = no_assumption_bounds(s)
    chosen = set(assumptions)
    if Assumption.MTS in chosen:
        result = result.intersect(mts_bounds(s))
    if Assumption.MTR in chosen and result is not None:
        result = result.intersect(mtr_bounds(s))
    if result is None:
        names = "+".join(sorted(a.value for a in chosen))
        raise InfeasibilityError(
            f"assumptions {{{names}}} are jointly inconsistent with the data: "
            "the intersection of their bounds is empty")
    return result


def bias_adjusted_naive(naive: Number, scen: ConfounderScenario) -> Number:
    """Naive estimate minus its asymptotic bias gamma0 * gamma1."""
    return naive - scen.gamma0 * scen.gamma1


def gamma0_feasible(s: AteSummary, gamma1: float) -> Interval:
    """Data-compatible range for gamma0 given gamma1.

    Only the |gamma1| = 1 case pins the confounder strata to the observed
    arms, yielding max{E[Y|Z=1]-1, -E[Y|Z=0]} <= gamma0 <=
    min{E[Y|Z=1], 1-E[Y|Z=0]}; for |gamma1| < 1 no sharper restriction is
    implemented and the full range [-1, 1] is returned.
    """
    if not -1 <= gamma1 <= 1:
        raise ValidationError(f"gamma1={gamma1} outside [-1,1]")
    if abs(gamma1) == 1:
        return Interval(max(s.mean_y1 - 1, -s.mean_y0),
                        min(s.mean_y1, 1 - s.mean_y0))
    return Interval(-1, 1)


def summary_of(counts: Union[TwoArmCounts, ThreeVarCounts],
               rational: bool = False) -> AteSummary:
    """Arm-mean summary of either counts type (Y-margin for three-variable data)."""
    if isinstance(counts, TwoArmCounts):
        return AteSummary.from_counts(counts, rational=rational)
    if isinstance(counts, ThreeVarCounts):
        return AteSummary.from_law(empirical_law(counts, rational=rational))
    raise ValidationError(f"unsupported counts type {type(counts).__name__}")


def stratified_bounds(sc: StratifiedCounts,
                      bound_fn: Callable[[AteSummary], Interval],
                      rational: bool = False) -> Interval:
    """Weight-averaged within-stratum bounds: sum_x w_x [lo_x, hi_x].

    Valid because the bounded functional is linear in the stratum mixture;
    stratification can only tighten relative to pooling.
    """
    lo = hi = 0
    for st in sc.strata:
        try:
            iv = bound_fn(summary_of(st.counts, rational=rational))
        except Exception as exc:
            raise type(exc)(f"stratum {st.label!r}: {exc}") from exc
        w = Fraction(st.weight) if rational else st.weight
        lo = lo + w * iv.lo
        hi = hi + w * iv.hi
    return Interval(lo, hi)


def rescale_interval(iv: Interval, lo: float, hi: float) -> Interval:
    """Map a unit-scale effect interval back to an outcome scale [lo, hi]."""
    if hi <= lo:
        raise ValidationError(f"rescale range [{lo}, {hi}] is empty")
    span = hi - lo
    return Interval(iv.lo * span, iv.hi * span)
