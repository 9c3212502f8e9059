"""Exact linear programming over latent response-type distributions.

Any linear functional of the latent response-type law can be bounded
subject to the observed-margin constraints by solving a small dense LP;
this module provides the state-space construction (with assumption
filtering), a two-phase dense simplex with Bland's anti-cycling rule that
runs in exact rational arithmetic whenever the inputs are exact, builders
for the noncompliance (GATE) problem, the instrumental-variables estimand,
and an independent vertex-enumeration oracle used to cross-check the
simplex.

Problems here are tiny (at most 64 variables), so exactness and
auditability beat speed everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .data import Interval, Number, ObservedLaw
from .errors import (
    DegenerateDesignError,
    EmptyStateSpaceError,
    InfeasibleProgramError,
    ValidationError,
)

GATE_COMPONENTS = ("Y(0,0)", "Y(0,1)", "Y(1,0)", "Y(1,1)", "S(0)", "S(1)")

_FLOAT_TOL = 1e-10


@dataclass(frozen=True)
class AssumptionSet:
    """Flags that prune latent response types.

    ``monotonicity_S``   : Pr[S(1) >= S(0)] = 1 (noncompliance: no defiers)
    ``exclusion_restriction``: Y(0,s) = Y(1,s) for s = 0,1
    ``monotone_S01``     : Pr[S(0) <= S(1)] = 1 (mediation flag, kept
                           separate from the GATE flag by contract)
    ``monotone_Y_in_z``  : Pr[Y(0,s) <= Y(1,s)] = 1 for s = 0,1
    ``monotone_Y_in_s``  : Pr[Y(z,0) <= Y(z,1)] = 1 for z = 0,1
    """

    monotonicity_S: bool = False
    exclusion_restriction: bool = False
    monotone_S01: bool = False
    monotone_Y_in_z: bool = False
    monotone_Y_in_s: bool = False


@dataclass(frozen=True)
class LatentStateSpace:
    """Admissible joint potential-outcome vectors after assumption filtering."""

    components: tuple
    states: tuple  # tuple of coordinate tuples

    def __post_init__(self):
        if not self.states:
            raise EmptyStateSpaceError("latent state space is empty")
        if len(set(self.states)) != len(self.states):
            raise ValidationError("duplicate latent states")

    @property
    def size(self) -> int:
        return len(self.states)

    def coord(self, name: str) -> int:
        try:
            return self.components.index(name)
        except ValueError:
            raise ValidationError(f"no component named {name!r}") from None


@dataclass(frozen=True)
class LatentLaw:
    """Probability vector over the states of a :class:`LatentStateSpace`."""

    space: LatentStateSpace
    q: tuple

    def __post_init__(self):
        if len(self.q) != self.space.size:
            raise ValidationError("latent law length does not match state count")
        if any(v < 0 for v in self.q):
            raise ValidationError("latent law has negative mass")
        total = sum(self.q)
        exact = all(isinstance(v, (int, Fraction)) for v in self.q)
        if (total != 1) if exact else abs(total - 1) > 1e-9:
            raise ValidationError(f"latent law mass {total} != 1")

    def expectation(self, coefs: Sequence[Number]) -> Number:
        return sum(c * v for c, v in zip(coefs, self.q))


@dataclass(frozen=True)
class Constraint:
    coefs: tuple
    rhs: Number
    label: str = ""


@dataclass(frozen=True)
class LinearProgram:
    """min/max objective . q subject to the equality constraints, q >= 0, sum q = 1."""

    objective: tuple
    eq_constraints: tuple
    space: Optional[LatentStateSpace] = None

    def __post_init__(self):
        n = len(self.objective)
        for c in self.eq_constraints:
            if len(c.coefs) != n:
                raise ValidationError(f"constraint {c.label!r} has wrong width")
            if not (0 <= c.rhs <= 1):
                raise ValidationError(f"constraint {c.label!r} rhs {c.rhs} outside [0,1]")


# ---------------------------------------------------------------------------
# State-space construction
# ---------------------------------------------------------------------------


def _assumption_predicates(assumptions: AssumptionSet, components: Sequence[str]):
    """Predicates (state -> bool) for each enabled flag; errors on missing coords."""
    idx = {name: i for i, name in enumerate(components)}

    def need(flag: str, names):
        missing = [n for n in names if n not in idx]
        if missing:
            raise ValidationError(
                f"assumption {flag} requires components {missing} absent from {list(components)}")
        return [idx[n] for n in names]

    preds = []
    if assumptions.exclusion_restriction:
        y00, y01, y10, y11 = need("exclusion_restriction",
                                  ("Y(0,0)", "Y(0,1)", "Y(1,0)", "Y(1,1)"))
        preds.append(lambda st: st[y00] == st[y10] and st[y01] == st[y11])
    if assumptions.monotonicity_S:
        s0, s1 = need("monotonicity_S", ("S(0)", "S(1)"))
        preds.append(lambda st: st[s1] >= st[s0])
    if assumptions.monotone_S01:
        s0, s1 = need("monotone_S01", ("S(0)", "S(1)"))
        preds.append(lambda st: st[s0] <= st[s1])
    if assumptions.monotone_Y_in_z:
        y00, y01, y10, y11 = need("monotone_Y_in_z",
                                  ("Y(0,0)", "Y(0,1)", "Y(1,0)", "Y(1,1)"))
        preds.append(lambda st: st[y10] >= st[y00] and st[y11] >= st[y01])
    if assumptions.monotone_Y_in_s:
        y00, y01, y10, y11 = need("monotone_Y_in_s",
                                  ("Y(0,0)", "Y(0,1)", "Y(1,0)", "Y(1,1)"))
        preds.append(lambda st: st[y01] >= st[y00] and st[y11] >= st[y10])
    return preds


def build_state_space(components: Sequence[str] = GATE_COMPONENTS,
                      assumptions: AssumptionSet = AssumptionSet()) -> LatentStateSpace:
    """Enumerate binary coordinate vectors and drop assumption-violating states."""
    components = tuple(components)
    if not components:
        raise ValidationError("component list is empty")
    preds = _assumption_predicates(assumptions, components)
    states = [st for st in itertools.product((0, 1), repeat=len(components))
              if all(p(st) for p in preds)]
    if not states:
        raise EmptyStateSpaceError(
            f"assumptions {assumptions} leave no admissible latent state")
    return LatentStateSpace(components=components, states=tuple(states))


# ---------------------------------------------------------------------------
# Program builders
# ---------------------------------------------------------------------------


def margin_constraints(space: LatentStateSpace, law: ObservedLaw) -> tuple:
    """One equality per observed cell: Pr[Y=y,S=s|Z=z] = sum over matching states.

    A state matches cell (y, s, z) when S(z) = s and Y(z, s) = y.  Redundant
    rows (the per-arm cells of one arm sum to 1) are retained on purpose;
    the solver tolerates them and the builder stays auditable.
    """
    s_idx = (space.coord("S(0)"), space.coord("S(1)"))
    y_idx = {(z, s): space.coord(f"Y({z},{s})") for z in (0, 1) for s in (0, 1)}
    rows = []
    for z in (0, 1):
        for s in (0, 1):
            for y in (0, 1):
                coefs = tuple(
                    1 if (st[s_idx[z]] == s and st[y_idx[(z, s)]] == y) else 0
                    for st in space.states)
                rows.append(Constraint(coefs=coefs, rhs=law.cell(y, s, z),
                                       label=f"P[Y={y},S={s}|Z={z}]"))
    return tuple(rows)


def build_gate_program(law: ObservedLaw,
                       assumptions: AssumptionSet = AssumptionSet(
                           monotonicity_S=True, exclusion_restriction=True),
                       ) -> LinearProgram:
    """LP whose optima are the sharp bounds on the effect of taking treatment.

    The objective is the mass of response types whose outcome is 1 when
    treatment is taken minus the mass whose outcome is 1 when it is not;
    the exclusion restriction must be enabled for that contrast to be a
    single well-defined estimand across assignment arms.
    """
    if not assumptions.exclusion_restriction:
        raise ValidationError("GATE requires the exclusion restriction; "
                              "without it the arm-specific effects differ")
    space = build_state_space(GATE_COMPONENTS, assumptions)
    y = {(z, s): space.coord(f"Y({z},{s})") for z in (0, 1) for s in (0, 1)}
    objective = tuple(
        (1 if (st[y[(0, 1)]] == 1 and st[y[(1, 1)]] == 1) else 0)
        - (1 if (st[y[(0, 0)]] == 1 and st[y[(1, 0)]] == 1) else 0)
        for st in space.states)
    return LinearProgram(objective=objective,
                         eq_constraints=margin_constraints(space, law),
                         space=space)


def gate_closed_form(law: ObservedLaw) -> Interval:
    """Sharp GATE bounds in closed form (no-defiers + exclusion restriction)."""
    lo = -1 + max(law.cell(1, 1, 0), law.cell(1, 1, 1)) \
         + max(law.cell(0, 0, 0), law.cell(0, 0, 1))
    hi = 1 - max(law.cell(0, 1, 0), law.cell(0, 1, 1)) \
         - max(law.cell(1, 0, 0), law.cell(1, 0, 1))
    return Interval(lo, hi)


def iv_estimand(law: ObservedLaw) -> Number:
    """Instrumental-variables ratio (E[Y|Z=1]-E[Y|Z=0]) / (E[S|Z=1]-E[S|Z=0])."""
    num = law.mean_y(1) - law.mean_y(0)
    den = law.p_s1(1) - law.p_s1(0)
    if den == 0:
        raise DegenerateDesignError("instrument is irrelevant: E[S|Z=1] = E[S|Z=0]")
    return num / den


# ---------------------------------------------------------------------------
# Dense two-phase simplex (Bland's rule)
# ---------------------------------------------------------------------------


def _program_is_exact(lp: LinearProgram) -> bool:
    vals = list(lp.objective)
    for c in lp.eq_constraints:
        vals.extend(c.coefs)
        vals.append(c.rhs)
    return all(isinstance(v, (int, Fraction)) for v in vals)


class _Simplex:
    """min c.x s.t. Ax = b, x >= 0 on a dense tableau.

    ``exact`` switches every comparison to exact rational arithmetic with
    zero tolerance; otherwise a 1e-10 feasibility tolerance applies.
    Entering and leaving variables follow Bland's smallest-index rule, so
    cycling is impossible.
    """

    def __init__(self, A, b, c, exact: bool):
        self.exact = exact
        self.tol = Fraction(0) if exact else _FLOAT_TOL
        conv = Fraction if exact else float
        self.n = len(c)
        self.m = len(A)
        self.c = [conv(v) for v in c]
        rows, rhs = [], []
        for i in range(self.m):
            row = [conv(v) for v in A[i]]
            r = conv(b[i])
            if r < 0:
                row = [-v for v in row]
                r = -r
            rows.append(row)
            rhs.append(r)
        self.rows = rows
        self.rhs = rhs

    def _pivot(self, tableau, basis, pivot_row, pivot_col):
        prow = tableau[pivot_row]
        pv = prow[pivot_col]
        tableau[pivot_row] = [v / pv for v in prow]
        prow = tableau[pivot_row]
        for i, row in enumerate(tableau):
            if i == pivot_row:
                continue
            f = row[pivot_col]
            if f != 0:
                new = [a - f * p for a, p in zip(row, prow)]
                if not self.exact and -self.tol < new[-1] < 0:
                    new[-1] = 0.0
                tableau[i] = new
        basis[pivot_row] = pivot_col

    def _iterate(self, tableau, basis, cost):
        # cost is a full reduced-cost row (length = columns incl. rhs slot)
        width = len(tableau[0]) - 1
        while True:
            enter = -1
            for j in range(width):
                if cost[j] < -self.tol:
                    enter = j
                    break
            if enter < 0:
                return cost
            leave, best = -1, None
            for i in range(self.m):
                a = tableau[i][enter]
                if a > self.tol:
                    ratio = tableau[i][-1] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        leave, best = i, ratio
            if leave < 0:
                raise ValidationError("linear program is unbounded")
            self._pivot(tableau, basis, leave, enter)
            pr = tableau[leave]
            f = cost[enter]
            if f != 0:
                for j in range(len(cost)):
                    cost[j] = cost[j] - f * pr[j]

    def solve(self):
        """Returns (optimal value, primal solution); raises on infeasibility."""
        zero = Fraction(0) if self.exact else 0.0
        one = Fraction(1) if self.exact else 1.0
        n, m = self.n, self.m
        tableau = []
        for i in range(m):
            row = list(self.rows[i]) + [one if k == i else zero for k in range(m)]
            row.append(self.rhs[i])
            tableau.append(row)
        basis = [n + i for i in range(m)]
        # Phase 1: minimize the artificial mass.
        cost = [zero] * (n + m + 1)
        for j in range(n):
            cost[j] = -sum(tableau[i][j] for i in range(m))
        cost[-1] = -sum(tableau[i][-1] for i in range(m))
        cost = self._iterate(tableau, basis, cost)
        infeas = -cost[-1]
        if infeas > self.tol:
            residuals = [zero] * m
            for i in range(m):
                if basis[i] >= n:
                    residuals[basis[i] - n] = tableau[i][-1]
            raise InfeasibleProgramError(
                f"margins incompatible with assumptions (artificial mass {float(infeas):.3g})",
                residuals=[(i, v) for i, v in enumerate(residuals)])
        # Drive remaining artificials out of the basis; drop redundant rows.
        drop = []
        for i in range(m):
            if basis[i] < n:
                continue
            pivot_col = -1
            for j in range(n):
                if abs(tableau[i][j]) > self.tol:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                self._pivot(tableau, basis, i, pivot_col)
            else:
                drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            tableau = [tableau[i] for i in keep]
            basis = [basis[i] for i in keep]
            self.m = m = len(keep)
        # Strip artificial columns.
        tableau = [row[:n] + [row[-1]] for row in tableau]
        # Phase 2.
        cost = list(self.c) + [zero]
        for i in range(m):
            f = cost[basis[i]]
            if f != 0:
                row = tableau[i]
                for j in range(n + 1):
                    cost[j] = cost[j] - f * row[j]
        cost = self._iterate(tableau, basis, cost)
        x = [zero] * n
        for i in range(m):
            x[basis[i]] = tableau[i][-1]
        if not self.exact:
            x = [v if v > 0 else 0.0 for v in x]
        value = sum(ci * xi for ci, xi in zip(self.c, x))
        return value, x


def _full_system(lp: LinearProgram):
    n = len(lp.objective)
    A = [list(c.coefs) for c in lp.eq_constraints]
    b = [c.rhs for c in lp.eq_constraints]
    A.append([1] * n)
    b.append(1)
    labels = [c.label or f"eq[{i}]" for i, c in enumerate(lp.eq_constraints)] + ["total mass"]
    return A, b, labels


@dataclass(frozen=True)
class LpSolution:
    """Sharp bounds plus the latent laws attaining each endpoint."""

    interval: Interval
    argmin: Union[LatentLaw, tuple]
    argmax: Union[LatentLaw, tuple]


def solve_bounds(lp: LinearProgram) -> LpSolution:
    """Minimum and maximum of the objective over the feasible polytope.

    Runs the exact simplex when all program data are rationals, floating
    point otherwise.  Infeasibility (margins incompatible with the
    assumption set) raises :class:`InfeasibleProgramError` with the
    violated-constraint residuals attached.
    """
    A, b, labels = _full_system(lp)
    exact = _program_is_exact(lp)
    try:
        lo_val, x_lo = _Simplex(A, b, lp.objective, exact).solve()
        neg = [-v for v in lp.objective]
        hi_neg, x_hi = _Simplex(A, b, neg, exact).solve()
    except InfeasibleProgramError as exc:
        exc.residuals = [(labels[i], v) for i, v in exc.residuals]
        raise
    hi_val = -hi_neg
    if not exact:
        # Guard against float drift inverting a genuinely degenerate interval.
        if lo_val > hi_val:
            lo_val = hi_val = (lo_val + hi_val) / 2
    wrap = (lambda x: LatentLaw(lp.space, tuple(x))) if lp.space is not None else tuple
    return LpSolution(interval=Interval(lo_val, hi_val),
                      argmin=wrap(x_lo), argmax=wrap(x_hi))


def find_feasible(lp: LinearProgram) -> Union[LatentLaw, tuple]:
    """A feasible latent law, or :class:`InfeasibleProgramError` with residuals.

    Phase-1-only solve; used to test whether observed margins are compatible
    with an assumption set without caring about any objective.
    """
    A, b, labels = _full_system(lp)
    zero_obj = [0] * len(lp.objective)
    try:
        _, x = _Simplex(A, b, zero_obj, _program_is_exact(lp)).solve()
    except InfeasibleProgramError as exc:
        exc.residuals = [(labels[i], v) for i, v in exc.residuals]
        raise
    return LatentLaw(lp.space, tuple(x)) if lp.space is not None else tuple(x)


# ---------------------------------------------------------------------------
# Vertex-enumeration oracle
# ---------------------------------------------------------------------------

VERTEX_MAX_STATES = 16
VERTEX_MAX_CONSTRAINTS = 10


def vertex_oracle(lp: LinearProgram) -> Interval:
    """Cross-check bounds by enumerating basic feasible solutions.

    Independent of the simplex path: every size-rank column subset is
    solved directly and screened for feasibility.  Only viable for small
    programs, hence the hard budget.
    """
    n = len(lp.objective)
    if n > VERTEX_MAX_STATES or len(lp.eq_constraints) > VERTEX_MAX_CONSTRAINTS:
        raise ValidationError(
            f"vertex enumeration budget exceeded: {n} states, "
            f"{len(lp.eq_constraints)} constraints "
            f"(limits {VERTEX_MAX_STATES}/{VERTEX_MAX_CONSTRAINTS})")
    A, b, _ = _full_system(lp)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(lp.objective, dtype=float)
    rank = np.linalg.matrix_rank(A)
    best_lo, best_hi = None, None
    for cols in itertools.combinations(range(n), min(rank, n)):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < len(cols):
            continue
        x_sub, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.any(x_sub < -1e-9):
            continue
        if np.max(np.abs(sub @ x_sub - b)) > 1e-9:
            continue
        x = np.zeros(n)
        x[list(cols)] = np.clip(x_sub, 0.0, None)
        val = float(c @ x)
        best_lo = val if best_lo is None else min(best_lo, val)
        best_hi = val if best_hi is None else max(best_hi, val)
    if best_lo is None:
        raise InfeasibleProgramError("no basic feasible solution exists")
    return Interval(best_lo, best_hi)
