"""Shared generators and oracles for the test suite."""

from __future__ import annotations

import numpy as np

from partialid.data import ObservedLaw, ThreeVarCounts, TwoArmCounts
from partialid.lp import LatentStateSpace


def azt_counts() -> TwoArmCounts:
    # Classic hypothetical AZT cohort: 1400 self-selected into treatment
    # (500 deaths), 600 into control (500 deaths).
    return TwoArmCounts(n_y1_z1=500, n_y0_z1=900, n_y1_z0=500, n_y0_z0=100)


def pertussis_counts() -> ThreeVarCounts:
    # Niakhar pertussis vaccine field study: severity recorded only for
    # infected children.
    return ThreeVarCounts(n_s1=((77, 129), (372, 176)), n_s0=(814, 3297),
                          outcome_defined_when_s0=False)


def cholestyramine_counts() -> ThreeVarCounts:
    # Published cholestyramine trial proportions encoded per mille, so the
    # empirical law reproduces the rounded three-decimal values exactly.
    return ThreeVarCounts(n_s1=((0, 0), (139, 473)), n_s0=((919, 81), (315, 73)))


def random_observed_law(rng: np.random.Generator) -> ObservedLaw:
    """Unrestricted random law: independent per-arm Dirichlet cells."""
    cells = {}
    for z in (0, 1):
        raw = rng.dirichlet(np.ones(4))
        raw = raw / raw.sum()
        for value, (y, s) in zip(raw, ((0, 0), (0, 1), (1, 0), (1, 1))):
            cells[(y, s, z)] = float(value)
        total = sum(cells[(y, s, z)] for y in (0, 1) for s in (0, 1))
        for y in (0, 1):
            for s in (0, 1):
                cells[(y, s, z)] /= total
    return ObservedLaw.from_cells(cells)


def pushforward_law(space: LatentStateSpace, q) -> ObservedLaw:
    """Observed law induced by a latent response-type distribution."""
    s_idx = (space.coord("S(0)"), space.coord("S(1)"))
    y_idx = {(z, s): space.coord(f"Y({z},{s})") for z in (0, 1) for s in (0, 1)}
    cells = {}
    for z in (0, 1):
        for s in (0, 1):
            for y in (0, 1):
                cells[(y, s, z)] = float(sum(
                    qi for st, qi in zip(space.states, q)
                    if st[s_idx[z]] == s and st[y_idx[(z, s)]] == y))
        total = sum(cells[(y, s, z)] for y in (0, 1) for s in (0, 1))
        for y in (0, 1):
            for s in (0, 1):
                cells[(y, s, z)] /= total
    return ObservedLaw.from_cells(cells)


def random_latent_law(rng: np.random.Generator, space: LatentStateSpace):
    return [float(v) for v in rng.dirichlet(np.ones(space.size))]


def split_oracle(mu0: float, pi: float, gamma: float, tol: float = 1e-10) -> float:
    """Brute-force root bracketing for the doomed-stratum control risk.

    Iteratively refines a grid over the feasible a-range until the log
    odds-ratio constraint holds to ``tol``; independent of the library's
    bisection.
    """
    lo = max(0.0, (mu0 - (1.0 - pi)) / pi)
    hi = min(1.0, mu0 / pi)

    def resid(a):
        b = (mu0 - a * pi) / (1.0 - pi)
        with np.errstate(divide="ignore"):
            return (np.log(a) - np.log1p(-a)) - (np.log(b) - np.log1p(-b)) - gamma

    for _ in range(60):
        grid = np.linspace(lo, hi, 41)[1:-1]
        values = resid(grid)
        best = int(np.argmin(np.abs(values)))
        if abs(values[best]) < tol:
            return float(grid[best])
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
    return float(grid[best])
