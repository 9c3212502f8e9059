#!/usr/bin/env python3
"""Longitudinal sensitivity-analysis experiment on synthetic cohorts.

Simulates a confounded cohort, contrasts the naive pooled slope with the
IPTW estimate, then sweeps the selection-bias adjustment over a gamma
grid.  A second cohort is generated with a known ignorability violation
to show the sweep crossing the truth at the generating gamma.

Usage: python scripts/run_msm_sensitivity.py [--n 5000] [--seed 7]
"""

import argparse
import sys

import numpy as np
import statsmodels.api as sm

from partialid.msm import (MsmSpec, cum_treatment, fit_treatment_model,
                           iptw_estimate, sensitivity_sweep_msm, simulate_cohort)


def naive_slope(cohort):
    rows_x, rows_y = [], []
    for r in cohort:
        for t in range(1, r.tau + 1):
            rows_x.append([1.0, cum_treatment(r.z, t), float(t), r.x0[0]])
            rows_y.append(r.y[t - 1])
    return float(sm.OLS(np.asarray(rows_y), np.asarray(rows_x)).fit().params[1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--confounding", type=float, default=0.8)
    parser.add_argument("--gamma-star", type=float, default=0.4, dest="gamma_star")
    args = parser.parse_args()

    spec = MsmSpec(tau=4, beta=(0.5, 1.0, 0.25, 0.75))
    print(f"structural slope (truth): {spec.beta[1]}")

    print("\n=== Conditionally ignorable cohort ===")
    cohort = simulate_cohort(spec, args.confounding, n=args.n, seed=args.seed)
    tmodel = fit_treatment_model(cohort)
    fit = iptw_estimate(cohort, tmodel)
    print(f"naive pooled slope : {naive_slope(cohort):+.3f} (confounded)")
    print(f"IPTW slope         : {fit.eta1:+.3f} (se {fit.se:.3f})")

    gammas = [round(g, 2) for g in np.linspace(-1.0, 1.0, 9)]
    print("\nadjustment sweep (should pass the truth near gamma = 0):")
    for g, eta1, se in sensitivity_sweep_msm(cohort, gammas, tmodel=tmodel):
        print(f"    gamma={g:+.2f} -> eta1={eta1:+.3f} (se {se:.3f})")

    print("\n=== Cohort violating ignorability at known gamma* ===")
    violated = simulate_cohort(spec, args.confounding, n=args.n,
                               seed=args.seed + 1, selection_gamma=args.gamma_star)
    sweep = sensitivity_sweep_msm(violated, [0.0, 0.5])
    (g0, e0, s0), (g1, e1, _) = sweep
    slope = (e1 - e0) / (g1 - g0)
    recovered = g0 + (spec.beta[1] - e0) / slope
    print(f"unadjusted estimate   : {e0:+.3f} (se {s0:.3f})")
    print(f"truth-recovering gamma: {recovered:+.3f} "
          f"(generating gamma* = {args.gamma_star})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
