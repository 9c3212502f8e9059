"""Typed containers for observed trial/study data, file ingestion, validation.

Counts are kept as exact integers next to any derived probabilities so that
downstream bound computations can run in exact rational arithmetic
(``fractions.Fraction``) when requested and reproduce textbook numbers
without rounding drift.

Canonical JSON schema::

    {"design": "two_arm" | "three_var" | "stratified",
     "counts": {...},
     "outcome_defined_when_s0": bool}      # three_var only

``two_arm`` counts: ``{"z1": {"y1": n, "y0": n}, "z0": {...}}``.
``three_var`` counts: ``{"z1": {"s1": {"y1": n, "y0": n}, "s0": {...} | n}, "z0": {...}}``
where a bare integer for ``"s0"`` is the merged cell of designs that record
the outcome only when S = 1 (``outcome_defined_when_s0`` false).
``stratified`` counts: ``{"strata": [{"label": str, "weight": w, "design": ...,
"counts": {...}}, ...]}``.

CSV alternative: header ``y,s,z,count`` (``s`` column absent for two-arm
designs); merged cells leave the ``y`` field empty.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

from .errors import ValidationError

Number = Union[int, float, Fraction]

_SUM_TOL = 1e-12


# ---------------------------------------------------------------------------
# Interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Ordered pair [lo, hi]; the common currency for every bound."""

    lo: Number
    hi: Number

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValidationError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Number:
        return self.hi - self.lo

    def contains(self, x: Number, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def contains_interval(self, other: "Interval", tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def as_floats(self) -> "Interval":
        return Interval(float(self.lo), float(self.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi


# ---------------------------------------------------------------------------
# Count containers
# ---------------------------------------------------------------------------


def _check_count(name: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"count {name} must be an integer, got {value!r}")
    if value < 0:
        raise ValidationError(f"count {name} is negative: {value}")
    return value


@dataclass(frozen=True)
class TwoArmCounts:
    """Cell counts n_yz for binary outcome Y and treatment Z."""

    n_y1_z1: int
    n_y0_z1: int
    n_y1_z0: int
    n_y0_z0: int

    def __post_init__(self):
        for name in ("n_y1_z1", "n_y0_z1", "n_y1_z0", "n_y0_z0"):
            _check_count(name, getattr(self, name))
        if self.arm_total(1) == 0:
            raise ValidationError("arm z=1 has zero total count")
        if self.arm_total(0) == 0:
            raise ValidationError("arm z=0 has zero total count")

    def n(self, y: int, z: int) -> int:
        return {(1, 1): self.n_y1_z1, (0, 1): self.n_y0_z1,
                (1, 0): self.n_y1_z0, (0, 0): self.n_y0_z0}[(y, z)]

    def arm_total(self, z: int) -> int:
        return self.n(1, z) + self.n(0, z)

    @property
    def total(self) -> int:
        return self.arm_total(0) + self.arm_total(1)


@dataclass(frozen=True)
class ThreeVarCounts:
    """Cell counts n_ysz for outcome Y, intermediate S, and arm Z.

    ``n_s1[z][y]`` holds S = 1 cells.  When ``outcome_defined_when_s0`` is
    true, ``n_s0`` has the same [z][y] layout; otherwise ``n_s0[z]`` is the
    single merged count of subjects with S = 0 in arm z, for designs where Y
    only exists after S = 1 (post-infection outcomes, truncation by death).
    The merged representation is deliberate: imputing a dummy Y would let
    likelihood code silently use cells that were never observed.
    """

    n_s1: tuple  # ((z0: (y0, y1)), (z1: (y0, y1)))
    n_s0: tuple  # same layout, or (z0_merged, z1_merged)
    outcome_defined_when_s0: bool = True

    def __post_init__(self):
        for z in (0, 1):
            for y in (0, 1):
                _check_count(f"n_(y={y},s=1,z={z})", self.n_s1[z][y])
            if self.outcome_defined_when_s0:
                for y in (0, 1):
                    _check_count(f"n_(y={y},s=0,z={z})", self.n_s0[z][y])
            else:
                _check_count(f"n_(s=0,z={z})", self.n_s0[z])
            if self.arm_total(z) == 0:
                raise ValidationError(f"arm z={z} has zero total count")

    @classmethod
    def from_cells(cls, cells: dict, outcome_defined_when_s0: bool = True) -> "ThreeVarCounts":
        """Build from a {(y, s, z): count} mapping (full designs only)."""
        if not outcome_defined_when_s0:
            raise ValidationError("from_cells requires a fully observed outcome; "
                                  "use the merged constructor arguments instead")
        n_s1 = tuple(tuple(cells[(y, 1, z)] for y in (0, 1)) for z in (0, 1))
        n_s0 = tuple(tuple(cells[(y, 0, z)] for y in (0, 1)) for z in (0, 1))
        return cls(n_s1=n_s1, n_s0=n_s0)

    def n(self, y: int, s: int, z: int) -> int:
        if s == 1:
            return self.n_s1[z][y]
        if not self.outcome_defined_when_s0:
            raise ValidationError("outcome undefined when s=0 for this design; "
                                  "only the merged count n_s0_total is available")
        return self.n_s0[z][y]

    def n_s0_total(self, z: int) -> int:
        if self.outcome_defined_when_s0:
            return self.n_s0[z][0] + self.n_s0[z][1]
        return self.n_s0[z]

    def n_s1_total(self, z: int) -> int:
        return self.n_s1[z][0] + self.n_s1[z][1]

    def arm_total(self, z: int) -> int:
        return self.n_s1_total(z) + self.n_s0_total(z)

    @property
    def total(self) -> int:
        return self.arm_total(0) + self.arm_total(1)


@dataclass(frozen=True)
class Stratum:
    label: str
    weight: float
    counts: Union[TwoArmCounts, ThreeVarCounts]

    def __post_init__(self):
        if self.weight < 0:
            raise ValidationError(f"stratum {self.label!r} has negative weight {self.weight}")


@dataclass(frozen=True)
class StratifiedCounts:
    """Per-stratum counts with Pr[X = x] weights summing to one."""

    strata: tuple

    def __post_init__(self):
        if len(self.strata) == 0:
            raise ValidationError("stratified data needs at least one stratum")
        total = sum(s.weight for s in self.strata)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"stratum weights sum to {total}, expected 1")


# ---------------------------------------------------------------------------
# Observed law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservedLaw:
    """Conditional law p_ysz = Pr[Y=y, S=s | Z=z] plus arm probabilities.

    ``p[z][s][y]`` stores the cells; entries may be floats or exact
    ``Fraction`` values.  For merged designs (outcome undefined when S = 0)
    the whole S = 0 mass of arm z sits in ``p[z][0][0]`` with ``p[z][0][1]``
    zero; ``outcome_defined_when_s0`` is then false and consumers that need
    the y-split at S = 0 must refuse such laws.
    """

    p: tuple  # [z][s][y]
    pz: tuple  # (Pr[Z=0], Pr[Z=1])
    n: Union[int, None] = None
    outcome_defined_when_s0: bool = True

    def __post_init__(self):
        for z in (0, 1):
            cells = [self.p[z][s][y] for s in (0, 1) for y in (0, 1)]
            if any(c < 0 or c > 1 for c in cells):
                raise ValidationError(f"law cells outside [0,1] in arm z={z}")
            total = sum(cells)
            if abs(total - 1) > _SUM_TOL:
                raise ValidationError(f"arm z={z} cells sum to {total}, expected 1")
        if abs(sum(self.pz) - 1) > _SUM_TOL or any(w < 0 for w in self.pz):
            raise ValidationError(f"arm probabilities {self.pz} do not form a distribution")

    @classmethod
    def from_cells(cls, cells: dict, pz=(0.5, 0.5), n=None) -> "ObservedLaw":
        """Build from a {(y, s, z): probability} mapping."""
        p = tuple(tuple(tuple(cells[(y, s, z)] for y in (0, 1)) for s in (0, 1)) for z in (0, 1))
        return cls(p=p, pz=tuple(pz), n=n)

    def cell(self, y: int, s: int, z: int) -> Number:
        if s == 0 and not self.outcome_defined_when_s0:
            raise ValidationError("outcome undefined when s=0 for this law")
        return self.p[z][s][y]

    def p_s1(self, z: int) -> Number:
        """Pr[S = 1 | Z = z]."""
        return self.p[z][1][0] + self.p[z][1][1]

    def p_s0(self, z: int) -> Number:
        return self.p[z][0][0] + self.p[z][0][1]

    def mean_y(self, z: int) -> Number:
        """E[Y | Z = z]; requires the outcome to be defined everywhere."""
        if not self.outcome_defined_when_s0:
            raise ValidationError("E[Y|Z] undefined: outcome not recorded when s=0")
        return self.p[z][0][1] + self.p[z][1][1]

    def as_floats(self) -> "ObservedLaw":
        p = tuple(tuple(tuple(float(self.p[z][s][y]) for y in (0, 1)) for s in (0, 1))
                  for z in (0, 1))
        return ObservedLaw(p=p, pz=tuple(float(w) for w in self.pz), n=self.n,
                           outcome_defined_when_s0=self.outcome_defined_when_s0)


def empirical_law(counts: ThreeVarCounts, rational: bool = False) -> ObservedLaw:
    """Empirical conditional law p_ysz = n_ysz / n_z with pz = n_z / n.

    With ``rational=True`` every cell is an exact ``Fraction``.
    """
    div = (lambda a, b: Fraction(a, b)) if rational else (lambda a, b: a / b)
    p = []
    for z in (0, 1):
        nz = counts.arm_total(z)
        if counts.outcome_defined_when_s0:
            s0 = (div(counts.n(0, 0, z), nz), div(counts.n(1, 0, z), nz))
        else:
            s0 = (div(counts.n_s0_total(z), nz), div(0, nz))
        s1 = (div(counts.n(0, 1, z), nz), div(counts.n(1, 1, z), nz))
        p.append((s0, s1))
    n = counts.total
    pz = (div(counts.arm_total(0), n), div(counts.arm_total(1), n))
    return ObservedLaw(p=tuple(p), pz=pz, n=n,
                       outcome_defined_when_s0=counts.outcome_defined_when_s0)


# ---------------------------------------------------------------------------
# Loading / serialization
# ---------------------------------------------------------------------------


def _cell_of(mapping: dict, key: str, where: str) -> int:
    if key not in mapping:
        raise ValidationError(f"missing cell {key!r} in {where}")
    return _check_count(f"{where}.{key}", mapping[key])


def _two_arm_from_json(counts: dict) -> TwoArmCounts:
    z1 = counts.get("z1")
    z0 = counts.get("z0")
    if not isinstance(z1, dict) or not isinstance(z0, dict):
        raise ValidationError("two_arm counts must have 'z1' and 'z0' objects")
    return TwoArmCounts(
        n_y1_z1=_cell_of(z1, "y1", "z1"), n_y0_z1=_cell_of(z1, "y0", "z1"),
        n_y1_z0=_cell_of(z0, "y1", "z0"), n_y0_z0=_cell_of(z0, "y0", "z0"),
    )


def _three_var_from_json(counts: dict, outcome_defined_when_s0: bool) -> ThreeVarCounts:
    n_s1, n_s0 = [], []
    for zkey, z in (("z0", 0), ("z1", 1)):
        arm = counts.get(zkey)
        if not isinstance(arm, dict):
            raise ValidationError(f"three_var counts must have a {zkey!r} object")
        s1 = arm.get("s1")
        if not isinstance(s1, dict):
            raise ValidationError(f"missing 's1' cells in {zkey}")
        n_s1.append((_cell_of(s1, "y0", f"{zkey}.s1"), _cell_of(s1, "y1", f"{zkey}.s1")))
        s0 = arm.get("s0")
        if outcome_defined_when_s0:
            if not isinstance(s0, dict):
                raise ValidationError(f"{zkey}.s0 must be an object with y0/y1 cells "
                                      "when the outcome is defined at s=0")
            n_s0.append((_cell_of(s0, "y0", f"{zkey}.s0"), _cell_of(s0, "y1", f"{zkey}.s0")))
        else:
            n_s0.append(_check_count(f"{zkey}.s0", s0))
    return ThreeVarCounts(n_s1=tuple(n_s1), n_s0=tuple(n_s0),
                          outcome_defined_when_s0=outcome_defined_when_s0)


def _from_json_obj(obj: dict):
    if not isinstance(obj, dict) or "design" not in obj:
        raise ValidationError("input must be a JSON object with a 'design' field")
    design = obj["design"]
    if design == "two_arm":
        return _two_arm_from_json(obj.get("counts", {}))
    if design == "three_var":
        return _three_var_from_json(obj.get("counts", {}),
                                    bool(obj.get("outcome_defined_when_s0", True)))
    if design == "stratified":
        strata_spec = obj.get("counts", {}).get("strata")
        if not isinstance(strata_spec, list) or not strata_spec:
            raise ValidationError("stratified counts must carry a nonempty 'strata' list")
        strata = []
        for i, sub in enumerate(strata_spec):
            label = str(sub.get("label", i))
            weight = sub.get("weight")
            if not isinstance(weight, (int, float)):
                raise ValidationError(f"stratum {label!r} lacks a numeric weight")
            inner = _from_json_obj(sub)
            if isinstance(inner, StratifiedCounts):
                raise ValidationError("nested stratified designs are not supported")
            strata.append(Stratum(label=label, weight=float(weight), counts=inner))
        return StratifiedCounts(strata=tuple(strata))
    raise ValidationError(f"unknown design {design!r}")


def _from_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    header = set(rows[0].keys())
    if not {"y", "z", "count"} <= header:
        raise ValidationError(f"{path}: CSV header must contain y,z,count (and optionally s)")
    has_s = "s" in header

    def parse_int(row, key, optional=False):
        raw = (row.get(key) or "").strip()
        if raw == "":
            if optional:
                return None
            raise ValidationError(f"{path}: missing {key!r} in row {row}")
        try:
            return int(raw)
        except ValueError as exc:
            raise ValidationError(f"{path}: non-integer {key}={raw!r}") from exc

    if not has_s:
        cells = {}
        for row in rows:
            y, z, c = parse_int(row, "y"), parse_int(row, "z"), parse_int(row, "count")
            cells[(y, z)] = cells.get((y, z), 0) + c
        missing = [(y, z) for y in (0, 1) for z in (0, 1) if (y, z) not in cells]
        if missing:
            raise ValidationError(f"{path}: missing two-arm cells {missing}")
        return TwoArmCounts(n_y1_z1=cells[(1, 1)], n_y0_z1=cells[(0, 1)],
                            n_y1_z0=cells[(1, 0)], n_y0_z0=cells[(0, 0)])

    full, merged = {}, {}
    for row in rows:
        z, c = parse_int(row, "z"), parse_int(row, "count")
        s = parse_int(row, "s")
        y = parse_int(row, "y", optional=True)
        if y is None:
            if s != 0:
                raise ValidationError(f"{path}: blank y only allowed for merged s=0 rows")
            merged[z] = merged.get(z, 0) + c
        else:
            full[(y, s, z)] = full.get((y, s, z), 0) + c
    if merged:
        bad = [k for k in full if k[1] == 0]
        if bad:
            raise ValidationError(f"{path}: mixes merged and split s=0 rows: {bad}")
        n_s1 = tuple(tuple(full.get((y, 1, z), 0) for y in (0, 1)) for z in (0, 1))
        n_s0 = (merged.get(0, 0), merged.get(1, 0))
        return ThreeVarCounts(n_s1=n_s1, n_s0=n_s0, outcome_defined_when_s0=False)
    missing = [k for k in ((y, s, z) for y in (0, 1) for s in (0, 1) for z in (0, 1))
               if k not in full]
    if missing:
        raise ValidationError(f"{path}: missing three-var cells {missing}")
    return ThreeVarCounts.from_cells(full)


def load_counts(path, format: str = "json"):
    """Load and validate a counts file; returns the matching counts type."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    if format == "json":
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON ({exc})") from exc
        return _from_json_obj(obj)
    if format == "csv":
        return _from_csv(path)
    raise ValidationError(f"unknown format {format!r} (expected 'json' or 'csv')")


def serialize_counts(counts) -> dict:
    """Inverse of the JSON loader; ``load(serialize(x)) == x``."""
    if isinstance(counts, TwoArmCounts):
        return {"design": "two_arm",
                "counts": {"z1": {"y1": counts.n_y1_z1, "y0": counts.n_y0_z1},
                           "z0": {"y1": counts.n_y1_z0, "y0": counts.n_y0_z0}}}
    if isinstance(counts, ThreeVarCounts):
        body = {}
        for zkey, z in (("z0", 0), ("z1", 1)):
            arm = {"s1": {"y0": counts.n_s1[z][0], "y1": counts.n_s1[z][1]}}
            if counts.outcome_defined_when_s0:
                arm["s0"] = {"y0": counts.n_s0[z][0], "y1": counts.n_s0[z][1]}
            else:
                arm["s0"] = counts.n_s0[z]
            body[zkey] = arm
        return {"design": "three_var", "counts": body,
                "outcome_defined_when_s0": counts.outcome_defined_when_s0}
    if isinstance(counts, StratifiedCounts):
        strata = []
        for st in counts.strata:
            sub = serialize_counts(st.counts)
            sub["label"] = st.label
            sub["weight"] = st.weight
            strata.append(sub)
        return {"design": "stratified", "counts": {"strata": strata}}
    raise ValidationError(f"cannot serialize {type(counts).__name__}")
