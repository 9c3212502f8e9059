"""Sensitivity analysis for longitudinal treatment effects.

Workflow: simulate (or import) a cohort with time-varying treatment and
treatment-confounder feedback, fit sequential treatment-probability
models, estimate the marginal-structural-model slope by inverse
probability of treatment weighting (IPTW), and sweep a bias adjustment
over a grid of sensitivity parameters quantifying departures from
conditionally ignorable treatment assignment.

The structural mean model is linear (identity link):

    E[Y(zbar, t) | X(0) = x0] = b0 + b1 * cum[zbar(t-1)] + b2 * t + b3 * x0

with cum[zbar(t-1)] = sum_{k=1}^{t-1} z(k).  The bias adjustment replaces
the observed outcome by y(t) - b(t) where b(t) sums, over past visits k,
the selection function gamma * (2 z(k) - 1) times the fitted probability
of the treatment *not* received; gamma = 0 leaves outcomes untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import statsmodels.api as sm

from .errors import DegenerateDesignError, SeparationError, ValidationError

# fixed generator constants (kept simple; confounding strength is the dial)
_RHO = 0.7          # covariate AR coefficient
_KAPPA = 0.5        # past treatment -> covariate
_PSI_PREV = 0.5     # previous treatment -> treatment log odds
_LAMBDA = 1.0       # covariate innovations -> outcome (confounding channel)
_NOISE_SD = 1.0

TRUNCATION = (0.01, 0.99)


@dataclass(frozen=True)
class LongitudinalRecord:
    """One subject: treatments/covariates at visits 0..tau, outcomes at 1..tau."""

    x0: tuple
    z: tuple
    x: tuple  # per-visit covariate vectors
    y: tuple

    def __post_init__(self):
        tau = len(self.z) - 1
        if tau < 1 or len(self.x) != tau + 1 or len(self.y) != tau:
            raise ValidationError("record has inconsistent visit counts "
                                  "(no missing visits are allowed)")
        if any(zk not in (0, 1) for zk in self.z):
            raise ValidationError("treatments must be binary")

    @property
    def tau(self) -> int:
        return len(self.z) - 1


@dataclass(frozen=True)
class MsmSpec:
    """Structural model configuration (identity link only)."""

    tau: int = 4
    beta: tuple = (0.5, 1.0, 0.25, 0.75)
    link: str = "identity"

    def __post_init__(self):
        if self.tau < 2:
            raise ValidationError(f"tau={self.tau} must be >= 2")
        if self.link != "identity":
            raise ValidationError(f"only the identity link is supported, got {self.link!r}")
        if len(self.beta) != 4:
            raise ValidationError("beta must be (b0, b1, b2, b3)")


@dataclass(frozen=True)
class CFunctionSpec:
    """Selection function c(t, k, history) = gamma * (2 z(k) - 1)."""

    gamma: float
    form: str = "brumback_sign"

    def __post_init__(self):
        if self.form != "brumback_sign":
            raise ValidationError(f"unsupported c-function form {self.form!r}")


@dataclass(frozen=True)
class IptwFit:
    eta1: float
    se: float
    params: tuple


def cum_treatment(z: Sequence[int], t: int) -> int:
    """Cumulative treatment entering the outcome at visit t: sum of z(1..t-1)."""
    return int(sum(z[1:t]))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def simulate_cohort(spec: MsmSpec, confounding_strength: float, n: int, seed: int,
                    selection_gamma: float = 0.0) -> list:
    """Synthetic confounded cohort whose marginal model is exactly ``spec``.

    Treatment at visit k follows a logistic model in the current covariate
    (coefficient = ``confounding_strength``) and the previous treatment;
    covariates feed back on past treatment.  Outcomes carry the covariate
    innovations, so treatment assignment is conditionally ignorable given
    the recorded history and the naive pooled regression is biased once
    ``confounding_strength`` is nonzero.

    ``selection_gamma`` adds a residual association between treatment and
    outcome *beyond* the recorded covariates, built to match the
    sign-based selection function at that gamma: the bias-adjustment sweep
    should recover the structural slope at gamma = ``selection_gamma``.
    """
    if n < 1:
        raise ValidationError(f"cohort size {n} must be >= 1")
    rng = np.random.default_rng(seed)
    tau = spec.tau
    b0, b1, b2, b3 = spec.beta
    x0 = rng.normal(size=n)
    x = np.empty((n, tau + 1))
    z = np.empty((n, tau + 1), dtype=int)
    innov = np.zeros((n, tau + 1))
    p_treat = np.empty((n, tau + 1))
    x[:, 0] = x0
    z_prev = np.zeros(n)
    for k in range(tau + 1):
        logits = confounding_strength * x[:, k] + _PSI_PREV * z_prev
        p = 1.0 / (1.0 + np.exp(-logits))
        z[:, k] = rng.random(n) < p
        p_treat[:, k] = p
        z_prev = z[:, k]
        if k < tau:
            innov[:, k + 1] = rng.normal(scale=_NOISE_SD, size=n)
            x[:, k + 1] = _RHO * x[:, k] + _KAPPA * z[:, k] + innov[:, k + 1]
    f_other = np.where(z == 1, 1.0 - p_treat, p_treat)
    sel_term = selection_gamma * (2.0 * z - 1.0) * f_other
    y = np.empty((n, tau))
    for t in range(1, tau + 1):
        cum = z[:, 1:t].sum(axis=1)
        drift = innov[:, 1:t].sum(axis=1)
        noise = rng.normal(scale=_NOISE_SD, size=n)
        y[:, t - 1] = (b0 + b1 * cum + b2 * t + b3 * x0
                       + _LAMBDA * drift + noise
                       + sel_term[:, :t].sum(axis=1))
    return [
        LongitudinalRecord(
            x0=(float(x0[i]),),
            z=tuple(int(v) for v in z[i]),
            x=tuple((float(v),) for v in x[i]),
            y=tuple(float(v) for v in y[i]))
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# Array staging
# ---------------------------------------------------------------------------


def _stack(cohort: Sequence[LongitudinalRecord]):
    if len(cohort) == 0:
        raise ValidationError("cohort is empty")
    tau = cohort[0].tau
    if any(r.tau != tau for r in cohort):
        raise ValidationError("all records must share the same visit count")
    x0 = np.array([r.x0 for r in cohort], dtype=float)
    z = np.array([r.z for r in cohort], dtype=int)
    x = np.array([r.x for r in cohort], dtype=float)
    y = np.array([r.y for r in cohort], dtype=float)
    return tau, x0, z, x, y


def _visit_design(tau: int, x0, z, x, with_covariates: bool):
    """Stacked per-visit design for the treatment models, visits 0..tau-1."""
    n = z.shape[0]
    blocks = []
    for k in range(tau):
        z_prev = z[:, k - 1] if k > 0 else np.zeros(n)
        cols = [np.ones(n), z_prev, np.full(n, float(k))]
        cols.extend(x0[:, j] for j in range(x0.shape[1]))
        if with_covariates:
            cols.extend(x[:, k, j] for j in range(x.shape[2]))
        blocks.append(np.column_stack(cols))
    return np.concatenate(blocks, axis=0)


@dataclass(frozen=True)
class TreatmentModel:
    """Pooled-logistic treatment models (stabilizer and full-history)."""

    tau: int
    params_num: tuple
    params_den: tuple
    truncation: tuple = TRUNCATION

    def _probs(self, design, params):
        eta = design @ np.asarray(params)
        p = 1.0 / (1.0 + np.exp(-eta))
        return np.clip(p, self.truncation[0], self.truncation[1])

    def prob_matrix(self, cohort, numerator: bool):
        """P[Z(k)=1 | history] for visits 0..tau-1, shape (n, tau)."""
        tau, x0, z, x, _ = _stack(cohort)
        if tau != self.tau:
            raise ValidationError("treatment model fitted on a different visit count")
        design = _visit_design(tau, x0, z, x, with_covariates=not numerator)
        params = self.params_num if numerator else self.params_den
        n = z.shape[0]
        return self._probs(design, params).reshape(tau, n).T


def fit_treatment_model(cohort: Sequence[LongitudinalRecord]) -> TreatmentModel:
    """Fit the sequential treatment models by pooled logistic regression.

    The full-history (denominator) model uses previous treatment, current
    covariates, visit index, and baseline covariates; the stabilizer
    (numerator) drops the time-varying covariates.  Fitted probabilities
    are truncated to [0.01, 0.99] downstream.
    """
    tau, x0, z, x, _ = _stack(cohort)
    for k in range(tau):
        col = z[:, k]
        if col.min() == col.max():
            raise SeparationError(
                f"visit {k} has single-valued treatment (all {int(col[0])}); "
                "the treatment model is separated")
    target = np.concatenate([z[:, k] for k in range(tau)])
    den = sm.GLM(target, _visit_design(tau, x0, z, x, with_covariates=True),
                 family=sm.families.Binomial()).fit()
    num = sm.GLM(target, _visit_design(tau, x0, z, x, with_covariates=False),
                 family=sm.families.Binomial()).fit()
    return TreatmentModel(tau=tau, params_num=tuple(num.params),
                          params_den=tuple(den.params))


# ---------------------------------------------------------------------------
# IPTW estimation and bias adjustment
# ---------------------------------------------------------------------------


def _stabilized_weights(cohort, tmodel: TreatmentModel):
    tau, _, z, _, _ = _stack(cohort)
    p_num = tmodel.prob_matrix(cohort, numerator=True)
    p_den = tmodel.prob_matrix(cohort, numerator=False)
    zk = z[:, :tau]
    f_num = np.where(zk == 1, p_num, 1.0 - p_num)
    f_den = np.where(zk == 1, p_den, 1.0 - p_den)
    ratios = f_num / f_den
    # weight for the outcome at visit t multiplies ratios over k = 0..t-1
    return np.cumprod(ratios, axis=1)


def iptw_estimate(cohort: Sequence[LongitudinalRecord],
                  tmodel: TreatmentModel) -> IptwFit:
    """Weighted pooled regression of y(t) on cumulative treatment.

    Working-independence weighted least squares over person-visits with
    stabilized weights; the SE is the cluster-robust (by subject) sandwich,
    matching a GEE fit with an independence working correlation.
    """
    tau, x0, z, _, y = _stack(cohort)
    n = z.shape[0]
    weights = _stabilized_weights(cohort, tmodel)
    rows_x, rows_y, rows_w, rows_id = [], [], [], []
    for t in range(1, tau + 1):
        cum = z[:, 1:t].sum(axis=1)
        cols = [np.ones(n), cum, np.full(n, float(t))]
        cols.extend(x0[:, j] for j in range(x0.shape[1]))
        rows_x.append(np.column_stack(cols))
        rows_y.append(y[:, t - 1])
        rows_w.append(weights[:, t - 1])
        rows_id.append(np.arange(n))
    X = np.concatenate(rows_x)
    if np.ptp(X[:, 1]) == 0 or np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateDesignError("cumulative treatment carries no independent "
                                    "variation; the slope is not estimable")
    fit = sm.WLS(np.concatenate(rows_y), X, weights=np.concatenate(rows_w)).fit(
        cov_type="cluster", cov_kwds={"groups": np.concatenate(rows_id)})
    return IptwFit(eta1=float(fit.params[1]), se=float(fit.bse[1]),
                   params=tuple(fit.params))


def bias_adjust(cohort: Sequence[LongitudinalRecord], tmodel: TreatmentModel,
                c: CFunctionSpec) -> list:
    """Replace y(t) by y(t) - b(t) for the given selection function.

    b(t) = sum_{k<t} gamma (2 z(k) - 1) * fhat[1 - z(k) | history(k)], with
    fhat from the full-history treatment model.  gamma = 0 returns outcomes
    bit-identical to the input.
    """
    if c.gamma == 0.0:
        return list(cohort)
    tau, _, z, _, y = _stack(cohort)
    p_den = tmodel.prob_matrix(cohort, numerator=False)
    zk = z[:, :tau]
    f_other = np.where(zk == 1, 1.0 - p_den, p_den)
    terms = c.gamma * (2.0 * zk - 1.0) * f_other
    b = np.cumsum(terms, axis=1)  # column t-1 sums visits 0..t-1
    adjusted = y - b
    return [
        LongitudinalRecord(x0=r.x0, z=r.z, x=r.x,
                           y=tuple(float(v) for v in adjusted[i]))
        for i, r in enumerate(cohort)
    ]


def sensitivity_sweep_msm(cohort: Sequence[LongitudinalRecord],
                          gammas: Sequence[float],
                          tmodel: Optional[TreatmentModel] = None) -> list:
    """(gamma, adjusted slope, se) over a gamma grid, sorted by gamma.

    The treatment model is fitted once and held fixed across the grid, so
    the adjusted slope is an affine function of gamma.
    """
    if len(gammas) == 0:
        raise ValidationError("gamma grid is empty")
    if tmodel is None:
        tmodel = fit_treatment_model(cohort)
    out = []
    for g in sorted(gammas):
        adjusted = bias_adjust(cohort, tmodel, CFunctionSpec(gamma=float(g)))
        fit = iptw_estimate(adjusted, tmodel)
        out.append((float(g), fit.eta1, fit.se))
    return out


# ---------------------------------------------------------------------------
# Cohort CSV round trip
# ---------------------------------------------------------------------------


def cohort_to_csv(cohort: Sequence[LongitudinalRecord], path) -> None:
    """Write `id,visit,z,x,y` rows (scalar covariate only; y blank at visit 0)."""
    if any(len(r.x0) != 1 for r in cohort):
        raise ValidationError("CSV export supports scalar covariates only")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "visit", "z", "x", "y"])
        for i, r in enumerate(cohort):
            for t in range(r.tau + 1):
                yval = "" if t == 0 else repr(r.y[t - 1])
                writer.writerow([i, t, r.z[t], repr(r.x[t][0]), yval])


def cohort_from_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty cohort file")
    by_id: dict = {}
    for row in rows:
        try:
            sid = int(row["id"])
            visit = int(row["visit"])
            z = int(row["z"])
            x = float(row["x"])
            y = float(row["y"]) if (row.get("y") or "").strip() != "" else None
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"{path}: bad row {row}: {exc}") from exc
        by_id.setdefault(sid, {})[visit] = (z, x, y)
    records = []
    for sid in sorted(by_id):
        visits = by_id[sid]
        tau = max(visits)
        if set(visits) != set(range(tau + 1)):
            raise ValidationError(f"{path}: subject {sid} has missing visits")
        z = tuple(visits[t][0] for t in range(tau + 1))
        x = tuple((visits[t][1],) for t in range(tau + 1))
        y = []
        for t in range(1, tau + 1):
            if visits[t][2] is None:
                raise ValidationError(f"{path}: subject {sid} missing outcome at visit {t}")
            y.append(visits[t][2])
        records.append(LongitudinalRecord(x0=(visits[0][1],), z=z, x=x, y=tuple(y)))
    return records
