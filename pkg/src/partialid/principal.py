"""Principal stratification for post-intermediate outcomes.

Treatment effects on an outcome that only exists once an intermediate
event S occurs (post-infection severity, truncation by death) are defined
within the always-affected ("doomed") principal stratum.  Under
randomization and the no-harm monotonicity Pr[S(0) >= S(1)] = 1 the effect
is partially identified; this module provides

* the testable monotonicity diagnostic,
* sharp bounds on the doomed-stratum effect with delta-method standard
  errors,
* a log-odds-ratio selection model indexed by gamma that point-identifies
  the effect for each fixed gamma (gamma = 0 is the no-selection model,
  gamma -> +/- inf recovers the bounds),
* constrained multinomial maximum likelihood with standard errors from the
  numeric observed information, and
* gamma-grid sensitivity sweeps feeding the uncertainty module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import optimize

from .data import Interval, ObservedLaw, ThreeVarCounts
from .errors import MonotonicityError, OptimizationError, ValidationError

_KINK_WARN = 0.05


def _logit(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    return math.log(p / (1.0 - p))


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# Identified summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrincipalIdentified:
    """Identifiable ingredients of the doomed-stratum effect.

    ``mu1`` = E[Y|S=1,Z=1], ``mu0`` = E[Y|S=1,Z=0], ``pi`` the doomed
    fraction among S=1 controls, truncated at 1; ``ps1_z`` the per-arm
    intermediate rates.
    """

    mu1: float
    mu0: float
    pi: float
    ps1_1: float
    ps1_0: float
    n: Union[int, None] = None

    def __post_init__(self):
        for name in ("mu1", "mu0", "pi", "ps1_1", "ps1_0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0,1]")
        if self.ps1_0 > 0:
            expected = min(1.0, self.ps1_1 / self.ps1_0)
            if abs(self.pi - expected) > 1e-9:
                raise ValidationError(
                    f"pi={self.pi} inconsistent with min(1, ps1_1/ps1_0)={expected}")

    @classmethod
    def from_counts(cls, counts: ThreeVarCounts) -> "PrincipalIdentified":
        n_inf1, n_inf0 = counts.n_s1_total(1), counts.n_s1_total(0)
        if n_inf1 == 0:
            raise ValidationError("doomed stratum empty in sample: no S=1 subjects in arm z=1")
        if n_inf0 == 0:
            raise ValidationError("no S=1 subjects in arm z=0: E[Y|S=1,Z=0] undefined")
        ps1_1 = n_inf1 / counts.arm_total(1)
        ps1_0 = n_inf0 / counts.arm_total(0)
        return cls(mu1=counts.n_s1[1][1] / n_inf1,
                   mu0=counts.n_s1[0][1] / n_inf0,
                   pi=min(1.0, ps1_1 / ps1_0),
                   ps1_1=ps1_1, ps1_0=ps1_0, n=counts.total)


@dataclass(frozen=True)
class SelectionModel:
    """Log odds ratio gamma of outcome risk, doomed versus protected stratum.

    ``math.inf`` and ``-math.inf`` are the explicit limit cases that recover
    the nonparametric bounds; they are first-class values here, never
    approximated by large finite floats.
    """

    gamma: float


@dataclass(frozen=True)
class CurvePoint:
    gamma: float
    beta_hat: float
    se: float


@dataclass(frozen=True)
class SensitivityCurve:
    """Estimated effect and SE over a gamma grid; non-increasing in gamma."""

    points: tuple
    n: Union[int, None] = None

    def __post_init__(self):
        gammas = [p.gamma for p in self.points]
        if any(g2 <= g1 for g1, g2 in zip(gammas, gammas[1:])):
            raise ValidationError("curve grid must be strictly increasing in gamma")
        betas = [p.beta_hat for p in self.points]
        if any(b2 > b1 + 1e-9 for b1, b2 in zip(betas, betas[1:])):
            raise ValidationError("beta_hat must be non-increasing in gamma")

    @property
    def gammas(self) -> tuple:
        return tuple(p.gamma for p in self.points)


@dataclass(frozen=True)
class MonotonicityCheck:
    consistent: bool
    ps1_1: float
    ps1_0: float


@dataclass(frozen=True)
class MleFit:
    beta_hat: float
    se: float
    loglik: float


@dataclass(frozen=True)
class NormalityDiagnostics:
    """Distance of the bound estimators from their non-normality kinks.

    ``gap_upper`` refers to the upper-bound estimator (identified as
    gamma -> -inf), whose limit law is normal only if 1 - E[Y|S=1,Z=0]
    differs from Pr[S=1|Z=1]/Pr[S=1|Z=0]; ``gap_lower`` is the analogue for
    the lower bound.  P-values come from likelihood-ratio tests of the
    corresponding equalities (1 constraint, chi-square with 1 df).
    """

    gap_upper: float
    gap_lower: float
    pvalue_upper: float
    pvalue_lower: float


# ---------------------------------------------------------------------------
# Monotonicity diagnostic and bounds
# ---------------------------------------------------------------------------


def check_monotonicity(law: ObservedLaw) -> MonotonicityCheck:
    """Testable implication of no-harm monotonicity: Pr[S=1|Z=1] <= Pr[S=1|Z=0]."""
    ps1_1, ps1_0 = law.p_s1(1), law.p_s1(0)
    return MonotonicityCheck(consistent=ps1_1 <= ps1_0, ps1_1=ps1_1, ps1_0=ps1_0)


def principal_effect_bounds(pid: PrincipalIdentified) -> Interval:
    """Sharp bounds on the doomed-stratum effect mu1 - E[Y(0)|doomed].

    E[Y(0)|doomed] ranges over the intersection of the mixture line
    (S=1 controls are a pi / (1-pi) blend of doomed and protected) with the
    unit square.  With pi = 1 the protected stratum is empty and the effect
    is point identified at mu1 - mu0.
    """
    if pid.ps1_1 == 0 or pid.pi == 0:
        raise ValidationError("doomed stratum is empty: the principal effect is undefined")
    a_hi = min(1.0, pid.mu0 / pid.pi)
    a_lo = max(0.0, (pid.mu0 - (1.0 - pid.pi)) / pid.pi)
    return Interval(pid.mu1 - a_hi, pid.mu1 - a_lo)


def doomed_outcome_split(pid: PrincipalIdentified, gamma: float) -> tuple:
    """Solve for (a, b) = control-arm risk in the doomed / protected stratum.

    The pair satisfies the mixture identity a*pi + b*(1-pi) = mu0 together
    with logit(a) - logit(b) = gamma.  The log odds ratio is strictly
    increasing along the mixture line, so bisection on a is unambiguous
    even near gamma = 0.
    """
    if not 0.0 < pid.pi < 1.0:
        raise ValidationError(f"split requires pi in (0,1), got {pid.pi}")
    mu0, pi = pid.mu0, pid.pi
    if mu0 in (0.0, 1.0):
        return mu0, mu0  # the mixture line degenerates to a single point
    a_lo = max(0.0, (mu0 - (1.0 - pi)) / pi)
    a_hi = min(1.0, mu0 / pi)
    if gamma == math.inf:
        return a_hi, (mu0 - a_hi * pi) / (1.0 - pi)
    if gamma == -math.inf:
        return a_lo, (mu0 - a_lo * pi) / (1.0 - pi)

    def excess(a: float) -> float:
        b = (mu0 - a * pi) / (1.0 - pi)
        return _logit(a) - _logit(min(1.0, max(0.0, b))) - gamma

    lo, hi = a_lo, a_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval exhausted at float resolution
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    return a, (mu0 - a * pi) / (1.0 - pi)


def beta_of_gamma(pid: PrincipalIdentified, model: Union[SelectionModel, float]) -> float:
    """Doomed-stratum effect identified by the selection model at fixed gamma.

    Non-increasing in gamma; gamma = 0 gives the no-selection estimate
    mu1 - mu0 and the infinite limits reproduce the nonparametric bounds.
    """
    gamma = model.gamma if isinstance(model, SelectionModel) else float(model)
    if pid.ps1_1 == 0 or pid.pi == 0:
        raise ValidationError("doomed stratum is empty: the principal effect is undefined")
    if pid.pi == 1.0:
        return pid.mu1 - pid.mu0
    if gamma == 0.0:
        return pid.mu1 - pid.mu0
    a, _ = doomed_outcome_split(pid, gamma)
    return pid.mu1 - a


# ---------------------------------------------------------------------------
# Bound standard errors (delta method)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundFit:
    """Estimated bounds with delta-method SEs; flags kink nonregularity."""

    interval: Interval
    se_lo: float
    se_hi: float
    nonregular: bool


def bound_fit(counts: ThreeVarCounts) -> BoundFit:
    """Bound estimates and SEs from per-arm multinomial asymptotics.

    The variance of each endpoint uses the gradient of whichever branch of
    the min/max is active.  Estimates near a kink (or with the doomed
    fraction truncated at 1) are flagged nonregular: the limit law is not
    normal there and Wald-type intervals are suspect.
    """
    pid = PrincipalIdentified.from_counts(counts)
    iv = principal_effect_bounds(pid)
    n1, n0 = counts.arm_total(1), counts.arm_total(0)
    n_inf1, n_inf0 = counts.n_s1_total(1), counts.n_s1_total(0)
    v_mu1 = pid.mu1 * (1 - pid.mu1) / n_inf1
    v_mu0 = pid.mu0 * (1 - pid.mu0) / n_inf0
    v_p1 = pid.ps1_1 * (1 - pid.ps1_1) / n1
    v_p0 = pid.ps1_0 * (1 - pid.ps1_0) / n0
    ratio = pid.ps1_1 / pid.ps1_0
    nonregular = ratio >= 1.0 - _KINK_WARN

    if ratio >= 1.0:
        warnings.warn("doomed fraction truncated at 1; bound estimators are "
                      "nonregular at this kink", RuntimeWarning)
        var = v_mu1 + v_mu0
        return BoundFit(interval=iv, se_lo=math.sqrt(var), se_hi=math.sqrt(var),
                        nonregular=True)

    p1, p0, mu0 = pid.ps1_1, pid.ps1_0, pid.mu0
    # lower endpoint: mu1 - min{1, mu0/ratio}
    if mu0 / ratio < 1.0:
        g = (1.0, -p0 / p1, mu0 * p0 / p1 ** 2, -mu0 / p1)  # d/d(mu1, mu0, p1, p0)
        var_lo = (g[0] ** 2 * v_mu1 + g[1] ** 2 * v_mu0
                  + g[2] ** 2 * v_p1 + g[3] ** 2 * v_p0)
    else:
        var_lo = v_mu1
    nonregular = nonregular or abs(mu0 - ratio) < _KINK_WARN
    # upper endpoint: mu1 - max{0, (mu0 - (1 - ratio)) / ratio}
    if (mu0 - (1.0 - ratio)) / ratio > 0.0:
        g = (1.0, -p0 / p1, (mu0 - 1.0) * p0 / p1 ** 2, -(mu0 - 1.0) / p1)
        var_hi = (g[0] ** 2 * v_mu1 + g[1] ** 2 * v_mu0
                  + g[2] ** 2 * v_p1 + g[3] ** 2 * v_p0)
    else:
        var_hi = v_mu1
    nonregular = nonregular or abs((1.0 - mu0) - ratio) < _KINK_WARN
    if nonregular:
        warnings.warn("bound estimator near a nonregular kink; "
                      "normal-based intervals may be unreliable", RuntimeWarning)
    return BoundFit(interval=iv, se_lo=math.sqrt(var_lo), se_hi=math.sqrt(var_hi),
                    nonregular=nonregular)


# ---------------------------------------------------------------------------
# Maximum likelihood under the selection model
# ---------------------------------------------------------------------------


def _principal_cells(counts: ThreeVarCounts):
    """(uninfected, s1 with y=0, s1 with y=1) counts per arm."""
    return {z: (counts.n_s0_total(z), counts.n_s1[z][0], counts.n_s1[z][1])
            for z in (0, 1)}


def _neg_loglik(params: np.ndarray, cells, gamma: float) -> float:
    u_p, u_d, t1, t0 = params
    if max(abs(u_p), abs(u_d), abs(t1), abs(t0)) > 200.0:
        return math.inf  # keep exp() finite; nothing plausible lives out here
    norm = 1.0 + math.exp(u_p) + math.exp(u_d)
    phi_i = 1.0 / norm
    phi_p = math.exp(u_p) / norm
    phi_d = math.exp(u_d) / norm
    th1 = _expit(t1)
    th0d = _expit(t0)
    th0p = _expit(t0 - gamma)
    probs1 = (phi_i + phi_p, phi_d * (1.0 - th1), phi_d * th1)
    probs0 = (phi_i,
              phi_d * (1.0 - th0d) + phi_p * (1.0 - th0p),
              phi_d * th0d + phi_p * th0p)
    ll = 0.0
    for probs, counts_z in ((probs1, cells[1]), (probs0, cells[0])):
        for n, p in zip(counts_z, probs):
            if n:
                if p <= 0.0:
                    return math.inf
                ll += n * math.log(p)
    return -ll


def _require_monotone(counts: ThreeVarCounts) -> PrincipalIdentified:
    pid = PrincipalIdentified.from_counts(counts)
    if pid.ps1_1 > pid.ps1_0:
        raise MonotonicityError(
            f"Pr[S=1|Z=1]={pid.ps1_1:.4f} exceeds Pr[S=1|Z=0]={pid.ps1_0:.4f}: "
            "data contradict no-harm monotonicity; bounds without monotonicity "
            "are not implemented here")
    return pid


def _start_params(pid: PrincipalIdentified, gamma: float) -> np.ndarray:
    eps = 1e-9
    phi_d = min(max(pid.ps1_1, eps), 1 - eps)
    phi_i = min(max(1.0 - pid.ps1_0, eps), 1 - eps)
    phi_p = max(pid.ps1_0 - pid.ps1_1, eps)
    if pid.pi < 1.0 and 0.0 < pid.mu0 < 1.0:
        a, _ = doomed_outcome_split(pid, gamma)
    else:
        a = pid.mu0
    clip = lambda p: min(max(p, 1e-12), 1 - 1e-12)
    return np.array([math.log(phi_p / phi_i),
                     math.log(phi_d / phi_i),
                     _logit(clip(pid.mu1)),
                     _logit(clip(a))])


def _observed_information(fun, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Numeric Hessian by central differences on the transformed scale."""
    k = len(x)
    hess = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = step
            ej[j] = step
            val = (fun(x + ei + ej) - fun(x + ei - ej)
                   - fun(x - ei + ej) + fun(x - ei - ej)) / (4.0 * step * step)
            hess[i, j] = hess[j, i] = val
    return hess


def mle_fit(counts: ThreeVarCounts, model: Union[SelectionModel, float]) -> MleFit:
    """Multinomial MLE of the doomed-stratum effect at fixed finite gamma.

    Parameters are the three stratum proportions (immune, protected,
    doomed) plus the doomed-arm risks Pr[Y(1)=1|doomed] and
    Pr[Y(0)=1|doomed]; the protected control risk is eliminated through
    the gamma odds-ratio constraint.  The optimizer runs on a
    logit/log-ratio transformed scale starting from the plug-in solution;
    the SE comes from the inverse numeric observed information via the
    delta method.
    """
    gamma = model.gamma if isinstance(model, SelectionModel) else float(model)
    if math.isinf(gamma):
        raise ValidationError("mle_fit requires finite gamma; "
                              "use bound_fit for the infinite limits")
    pid = _require_monotone(counts)
    cells = _principal_cells(counts)
    x0 = _start_params(pid, gamma)
    nll0 = _neg_loglik(x0, cells, gamma)
    res = optimize.minimize(
        _neg_loglik, x0, args=(cells, gamma), method="Nelder-Mead",
        options=dict(xatol=1e-9, fatol=1e-12, maxiter=20000, maxfev=20000))
    if not res.success and res.fun > nll0 + 1e-8:
        raise OptimizationError(f"likelihood maximization failed: {res.message}")
    # The plug-in start is itself the NPMLE whenever the empirical law is
    # attainable; keep it unless the optimizer found a genuine improvement,
    # so numerically tied solutions do not jitter the estimate.
    x = res.x if res.fun < nll0 - 1e-10 else x0
    loglik = -float(min(res.fun, nll0))
    th1 = _expit(x[2])
    th0d = _expit(x[3])
    beta = th1 - th0d
    for name, v in (("Pr[Y(1)=1|doomed]", th1), ("Pr[Y(0)=1|doomed]", th0d)):
        if v < 1e-6 or v > 1 - 1e-6:
            warnings.warn(f"{name} estimated at the boundary ({v:.2e}); "
                          "SEs are unreliable", RuntimeWarning)
    info = _observed_information(lambda p: _neg_loglik(p, cells, gamma), x)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
        warnings.warn("observed information singular; using pseudo-inverse",
                      RuntimeWarning)
    grad = np.array([0.0, 0.0, th1 * (1.0 - th1), -th0d * (1.0 - th0d)])
    var = float(grad @ cov @ grad)
    if var < 0:
        raise OptimizationError("negative delta-method variance from observed information")
    return MleFit(beta_hat=beta, se=math.sqrt(var), loglik=loglik)


def sensitivity_sweep(counts: ThreeVarCounts, gammas: Sequence[float]) -> SensitivityCurve:
    """Effect estimates over a gamma grid; +/-inf entries use the bound fit.

    Grid points are independent computations (no shared mutable state), so
    the sweep may be parallelized; results follow the input grid order,
    which must be strictly increasing.
    """
    if len(gammas) == 0:
        raise ValidationError("gamma grid is empty")
    points = []
    bounds = None
    for g in gammas:
        if math.isinf(g):
            if bounds is None:
                bounds = bound_fit(counts)
            if g > 0:
                points.append(CurvePoint(gamma=g, beta_hat=bounds.interval.lo,
                                         se=bounds.se_lo))
            else:
                points.append(CurvePoint(gamma=g, beta_hat=bounds.interval.hi,
                                         se=bounds.se_hi))
        else:
            fit = mle_fit(counts, g)
            points.append(CurvePoint(gamma=float(g), beta_hat=fit.beta_hat, se=fit.se))
    return SensitivityCurve(points=tuple(points), n=counts.total)


# ---------------------------------------------------------------------------
# Normality diagnostics for the bound estimators
# ---------------------------------------------------------------------------


def _arm_loglik(cells_z, probs) -> float:
    ll = 0.0
    for n, p in zip(cells_z, probs):
        if n:
            if p <= 0:
                return -math.inf
            ll += n * math.log(p)
    return ll


def _saturated_loglik(cells) -> float:
    ll = 0.0
    for z in (0, 1):
        nz = sum(cells[z])
        ll += _arm_loglik(cells[z], tuple(c / nz for c in cells[z]))
    return ll


def _constrained_loglik(cells, upper: bool) -> float:
    """Max loglik subject to mu0 = 1 - ratio (upper) or mu0 = ratio (lower)."""

    def neg(params):
        u_q0, u_r, t1 = params
        q0 = _expit(u_q0)          # Pr[S=1|Z=0]
        ratio = _expit(u_r)        # Pr[S=1|Z=1] / Pr[S=1|Z=0]
        q1 = q0 * ratio
        mu0 = 1.0 - ratio if upper else ratio
        th1 = _expit(t1)
        probs1 = (1.0 - q1, q1 * (1.0 - th1), q1 * th1)
        probs0 = (1.0 - q0, q0 * (1.0 - mu0), q0 * mu0)
        return -(_arm_loglik(cells[1], probs1) + _arm_loglik(cells[0], probs0))

    n1 = sum(cells[1])
    n0 = sum(cells[0])
    q1_emp = (cells[1][1] + cells[1][2]) / n1
    q0_emp = (cells[0][1] + cells[0][2]) / n0
    mu1_emp = cells[1][2] / max(cells[1][1] + cells[1][2], 1)
    clip = lambda p: min(max(p, 1e-9), 1 - 1e-9)
    x0 = np.array([_logit(clip(q0_emp)),
                   _logit(clip(q1_emp / q0_emp if q0_emp > 0 else 0.5)),
                   _logit(clip(mu1_emp))])
    best = None
    for start in (x0, np.zeros(3)):
        res = optimize.minimize(neg, start, method="Nelder-Mead",
                                options=dict(xatol=1e-10, fatol=1e-12,
                                             maxiter=20000, maxfev=20000))
        if best is None or res.fun < best.fun:
            best = res
    if not best.success and not math.isfinite(best.fun):
        raise OptimizationError(f"constrained fit failed: {best.message}")
    return -float(best.fun)


def check_normality_conditions(counts: ThreeVarCounts) -> NormalityDiagnostics:
    """Likelihood-ratio diagnostics for normality of the bound estimators."""
    from ._stats import chi2_sf_1df

    pid = PrincipalIdentified.from_counts(counts)
    ratio = pid.ps1_1 / pid.ps1_0
    cells = _principal_cells(counts)
    sat = _saturated_loglik(cells)
    lr_upper = max(0.0, 2.0 * (sat - _constrained_loglik(cells, upper=True)))
    lr_lower = max(0.0, 2.0 * (sat - _constrained_loglik(cells, upper=False)))
    return NormalityDiagnostics(
        gap_upper=abs(1.0 - pid.mu0 - ratio),
        gap_lower=abs(pid.mu0 - ratio),
        pvalue_upper=chi2_sf_1df(lr_upper),
        pvalue_lower=chi2_sf_1df(lr_lower),
    )
