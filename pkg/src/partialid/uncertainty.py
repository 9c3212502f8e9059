"""Formal inference for partially identified parameters.

Given endpoint estimates (beta_l, beta_u) of an ignorance interval and
root-n-consistent standard errors, this module builds

* the estimated ignorance interval itself,
* the pointwise uncertainty interval, which covers the true parameter at
  level 1 - alpha uniformly over the sensitivity range (the
  Imbens-Manski-style critical value c_alpha interpolates between
  one-sided and two-sided normal quantiles as the identified gap grows),
* the strong uncertainty interval, which covers the whole ignorance
  region at level 1 - alpha, and
* sup-t bootstrap confidence bands over the sensitivity-parameter grid.

By construction ignorance <= pointwise <= strong (as sets), exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from ._stats import norm_cdf, norm_ppf
from .data import Interval, ThreeVarCounts
from .errors import PartialIdError, ValidationError
from .principal import SensitivityCurve

_BISECT_TOL = 1e-13


@dataclass(frozen=True)
class BoundEstimates:
    """Endpoint estimates with root-n-scaled standard deviations.

    ``sigma_l`` and ``sigma_u`` are the asymptotic SDs of sqrt(n) times the
    endpoint estimators, so the finite-sample SE of an endpoint is
    ``sigma / sqrt(n)``.  Construction reorders a flipped pair (sampling
    noise can invert nearly-point-identified endpoints) so that
    ``beta_l <= beta_u`` always holds afterwards.
    """

    beta_l: float
    beta_u: float
    sigma_l: float
    sigma_u: float
    n: int
    gamma_at_l: Union[float, None] = None
    gamma_at_u: Union[float, None] = None

    def __post_init__(self):
        if self.sigma_l < 0 or self.sigma_u < 0:
            raise ValidationError("sigma estimates must be nonnegative")
        if self.n < 1:
            raise ValidationError(f"sample size {self.n} must be >= 1")
        if self.beta_l > self.beta_u:
            for a, b in (("beta_l", "beta_u"), ("sigma_l", "sigma_u"),
                         ("gamma_at_l", "gamma_at_u")):
                va, vb = getattr(self, a), getattr(self, b)
                object.__setattr__(self, a, vb)
                object.__setattr__(self, b, va)

    @property
    def se_l(self) -> float:
        return self.sigma_l / math.sqrt(self.n)

    @property
    def se_u(self) -> float:
        return self.sigma_u / math.sqrt(self.n)

    def ignorance(self) -> Interval:
        return Interval(self.beta_l, self.beta_u)


@dataclass(frozen=True)
class UncertaintyResult:
    ignorance: Interval
    pointwise: Interval
    strong: Interval
    c_alpha: float
    alpha: float

    def __post_init__(self):
        if not (self.pointwise.contains_interval(self.ignorance)
                and self.strong.contains_interval(self.pointwise)):
            raise ValidationError("uncertainty intervals are not nested")
        if not (norm_ppf(1.0 - self.alpha) <= self.c_alpha
                <= norm_ppf(1.0 - self.alpha / 2.0)):
            raise ValidationError(
                f"c_alpha={self.c_alpha} outside the one-/two-sided quantile bracket")

    def excludes_zero(self) -> dict:
        """Hypothesis-test duality: is 'no effect' rejected by each region?"""
        return {name: not iv.contains(0.0)
                for name, iv in (("ignorance", self.ignorance),
                                 ("pointwise", self.pointwise),
                                 ("strong", self.strong))}


@dataclass(frozen=True)
class ConfidenceBand:
    """Simultaneous band over the gamma grid: covers the whole curve."""

    points: tuple  # (gamma, lo, hi)
    coverage: float
    critical_value: float
    redrawn: int = 0

    def __post_init__(self):
        if any(lo > hi for _, lo, hi in self.points):
            raise ValidationError("band endpoints out of order")

    def union(self) -> Interval:
        return Interval(min(lo for _, lo, _ in self.points),
                        max(hi for _, _, hi in self.points))


def solve_c_alpha(be: BoundEstimates, alpha: float) -> float:
    """Critical value solving Phi(c + sqrt(n) gap / max sigma) - Phi(-c) = 1 - alpha.

    Root-bracketed between the one-sided and two-sided normal quantiles and
    found by bisection; the residual at the returned root is below 1e-10.
    Monotone non-increasing in the normalized gap, with c = z_{1-alpha/2}
    at gap 0 and c -> z_{1-alpha} as the gap grows.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha={alpha} must be in (0,1)")
    sigma = max(be.sigma_l, be.sigma_u)
    if sigma <= 0.0:
        raise ValidationError("both sigma estimates are zero: c_alpha is undefined")
    delta = math.sqrt(be.n) * (be.beta_u - be.beta_l) / sigma

    def residual(c: float) -> float:
        return norm_cdf(c + delta) - norm_cdf(-c) - (1.0 - alpha)

    z_one = norm_ppf(1.0 - alpha)
    z_two = norm_ppf(1.0 - alpha / 2.0)
    lo = z_one - 1e-9
    hi = z_two + 1e-9
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    # the root lies in [z_one, z_two] mathematically; strip bisection noise
    # so the interval-nesting guarantee holds exactly
    return min(max(0.5 * (lo + hi), z_one), z_two)


def pointwise_interval(be: BoundEstimates, alpha: float) -> Interval:
    """(1 - alpha) pointwise uncertainty interval for the target parameter.

    With both sigmas zero (a degenerate, point-identified limit) the
    interval collapses to the ignorance interval itself.
    """
    if max(be.sigma_l, be.sigma_u) == 0.0:
        return be.ignorance()
    c = solve_c_alpha(be, alpha)
    return Interval(be.beta_l - c * be.se_l, be.beta_u + c * be.se_u)


def strong_interval(be: BoundEstimates, alpha: float) -> Interval:
    """(1 - alpha) uncertainty interval for the entire ignorance region.

    Equivalently the union over the sensitivity range of the per-point
    (1 - alpha) Wald intervals; always contains the pointwise interval.
    """
    z = norm_ppf(1.0 - alpha / 2.0)
    return Interval(be.beta_l - z * be.se_l, be.beta_u + z * be.se_u)


def uncertainty_report(be: BoundEstimates, alpha: float = 0.05) -> UncertaintyResult:
    return UncertaintyResult(
        ignorance=be.ignorance(),
        pointwise=pointwise_interval(be, alpha),
        strong=strong_interval(be, alpha),
        c_alpha=solve_c_alpha(be, alpha),
        alpha=alpha)


def bound_estimates_from_curve(curve: SensitivityCurve,
                               gamma_range: tuple) -> BoundEstimates:
    """Endpoint estimates over a gamma interval read off a sensitivity curve.

    The curve is non-increasing, so the extrema sit at the range endpoints;
    both endpoints must be present on the grid.  The attaining gammas are
    recorded: because they are the range endpoints for every data law, the
    fixed-extremum condition behind the pointwise interval holds whenever
    the range is chosen independently of the data (a usage contract this
    code cannot enforce).
    """
    if curve.n is None:
        raise ValidationError("curve lacks a sample size; build it from counts")
    g_lo, g_hi = gamma_range
    if g_lo > g_hi:
        raise ValidationError(f"gamma range ({g_lo}, {g_hi}) out of order")
    covered = [p for p in curve.points if g_lo <= p.gamma <= g_hi]
    if not covered:
        raise ValidationError(f"curve grid does not intersect gamma range [{g_lo}, {g_hi}]")
    for endpoint in (g_lo, g_hi):
        if not any(p.gamma == endpoint for p in curve.points):
            raise ValidationError(
                f"curve grid does not cover the gamma range endpoint {endpoint}")
    low = min(covered, key=lambda p: p.beta_hat)
    high = max(covered, key=lambda p: p.beta_hat)
    return BoundEstimates(
        beta_l=low.beta_hat, beta_u=high.beta_hat,
        sigma_l=low.se * math.sqrt(curve.n),
        sigma_u=high.se * math.sqrt(curve.n),
        n=curve.n, gamma_at_l=low.gamma, gamma_at_u=high.gamma)


# ---------------------------------------------------------------------------
# Bootstrap confidence band
# ---------------------------------------------------------------------------


def _resample_counts(counts: ThreeVarCounts, rng: np.random.Generator) -> ThreeVarCounts:
    """Arm-stratified multinomial resample with the original arm sizes."""
    n_s1, n_s0 = [], []
    for z in (0, 1):
        nz = counts.arm_total(z)
        if counts.outcome_defined_when_s0:
            cells = [counts.n_s1[z][0], counts.n_s1[z][1],
                     counts.n_s0[z][0], counts.n_s0[z][1]]
        else:
            cells = [counts.n_s1[z][0], counts.n_s1[z][1], counts.n_s0_total(z)]
        draw = rng.multinomial(nz, np.asarray(cells, dtype=float) / nz)
        n_s1.append((int(draw[0]), int(draw[1])))
        n_s0.append((int(draw[2]), int(draw[3])) if counts.outcome_defined_when_s0
                    else int(draw[2]))
    return ThreeVarCounts(n_s1=tuple(n_s1), n_s0=tuple(n_s0),
                          outcome_defined_when_s0=counts.outcome_defined_when_s0)


def bootstrap_band(counts: ThreeVarCounts,
                   estimator: Callable[[ThreeVarCounts, float], tuple],
                   gammas: Sequence[float],
                   B: int = 1000,
                   alpha: float = 0.05,
                   seed: int = 0) -> ConfidenceBand:
    """Sup-t bootstrap band covering the whole curve gamma -> beta(gamma).

    ``estimator(counts, gamma)`` must return ``(beta_hat, se)``.  Replicate
    b draws its RNG from the stream keyed (seed, b), so results do not
    depend on evaluation order.  Replicates that break the estimator
    (typically an emptied cell) are redrawn from the same stream and the
    redraw count is reported.
    """
    if B < 200:
        raise ValidationError(f"B={B} bootstrap replicates is too few (need >= 200)")
    gammas = list(gammas)
    base = [estimator(counts, g) for g in gammas]
    beta0 = np.array([b for b, _ in base])
    se0 = np.array([s for _, s in base])
    if np.any(se0 <= 0):
        raise ValidationError("estimator returned a nonpositive SE on the original data")
    sup_t = np.empty(B)
    redrawn = 0
    for b in range(B):
        rng = np.random.default_rng([seed, b])
        for _ in range(100):
            try:
                rep = _resample_counts(counts, rng)
                vals = [estimator(rep, g) for g in gammas]
                break
            except PartialIdError:
                redrawn += 1
        else:
            raise ValidationError("bootstrap replicate kept failing after 100 redraws")
        beta_b = np.array([v for v, _ in vals])
        se_b = np.array([max(s, 1e-12) for _, s in vals])
        sup_t[b] = np.max(np.abs(beta_b - beta0) / se_b)
    crit = float(np.quantile(sup_t, 1.0 - alpha, method="higher"))
    points = tuple((g, float(bb - crit * ss), float(bb + crit * ss))
                   for g, bb, ss in zip(gammas, beta0, se0))
    return ConfidenceBand(points=points, coverage=1.0 - alpha,
                          critical_value=crit, redrawn=redrawn)
