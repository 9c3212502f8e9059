"""Small statistical primitives used across modules.

Standard-library implementations only: the normal CDF goes through
``math.erfc`` and quantiles through :class:`statistics.NormalDist`, both
accurate to double precision, so no statistics dependency is pulled in
for code paths that otherwise need none.
"""

from __future__ import annotations

import math
from statistics import NormalDist

_STD_NORMAL = NormalDist()


def norm_cdf(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Standard normal quantile, p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile probability must be in (0,1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


def chi2_sf_1df(x: float) -> float:
    """Survival function of the chi-square distribution with 1 df.

    Uses P[X > x] = 2(1 - Phi(sqrt(x))) = erfc(sqrt(x/2)).
    """
    if x < 0:
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))
