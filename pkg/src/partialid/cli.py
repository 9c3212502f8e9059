"""Command-line front end.

Subcommands: ``ate-bounds``, ``principal``, ``gate``, ``mediation``,
``msm-sim``, ``uncertainty``.  Every command reads a counts file
(``--input``, JSON or CSV), emits a JSON report by default (full
precision, deterministically ordered keys) or an aligned text rendering
(3 decimals) of the same numbers, and exits with 0 on success, 2 on
validation errors, 3 when the data falsify the requested assumptions, and
4 on numeric failure.  ``PARTIALID_NO_COLOR`` disables text styling.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from fractions import Fraction

from . import __version__
from . import ate, mediation, msm, principal, uncertainty
from .data import (Interval, StratifiedCounts, ThreeVarCounts, empirical_law,
                   load_counts)
from .errors import InfeasibilityError, NumericError, PartialIdError, ValidationError
from .lp import AssumptionSet, build_gate_program, gate_closed_form, iv_estimand, solve_bounds
from ._stats import norm_ppf

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _jsonable(value):
    if isinstance(value, Fraction):
        return {"value": float(value), "exact": f"{value.numerator}/{value.denominator}"}
    if isinstance(value, Interval):
        return {"lo": _jsonable(value.lo), "hi": _jsonable(value.hi)}
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _provenance(args, extra=None) -> dict:
    digest = hashlib.sha256(open(args.input, "rb").read()).hexdigest() \
        if getattr(args, "input", None) and os.path.exists(args.input) else None
    block = {"version": __version__, "input_sha256": digest,
             "seed": getattr(args, "seed", None)}
    if extra:
        block.update(extra)
    return block


def _styled(text: str, code: str) -> str:
    if os.environ.get("PARTIALID_NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\x1b[{code}m{text}\x1b[0m"


def _fmt(value, nd=3) -> str:
    if isinstance(value, dict) and "value" in value:
        value = value["value"]
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value)
    return f"{float(value):.{nd}f}"


def _fmt_interval(iv) -> str:
    if isinstance(iv, dict):
        return f"[{_fmt(iv['lo'])}, {_fmt(iv['hi'])}]"
    return f"[{_fmt(iv.lo)}, {_fmt(iv.hi)}]"


def _emit(report: dict, args, text_renderer, csv_renderer=None) -> None:
    if args.report == "json":
        payload = json.dumps(_jsonable(report), sort_keys=True, indent=2)
    elif args.report == "csv":
        if csv_renderer is None:
            raise ValidationError(
                f"{report.get('command', 'this command')} has no CSV report; "
                "use --report json|text")
        payload = csv_renderer(report)
    else:
        payload = text_renderer(report)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)


def _parse_grid(spec: str) -> list:
    """'lo:hi:step' -> ascending floats; 'lo:hi' endpoints may be -inf/inf."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid spec {spec!r} must look like lo:hi:step")
    lo, hi, step = (_parse_gamma_token(parts[0]), _parse_gamma_token(parts[1]),
                    float(parts[2]))
    if math.isinf(lo) or math.isinf(hi):
        raise ValidationError("grid endpoints must be finite; "
                              "use --infinite-endpoints for the limits")
    if step <= 0 or hi < lo:
        raise ValidationError(f"bad grid spec {spec!r}")
    count = int(round((hi - lo) / step))
    grid = [lo + i * step for i in range(count + 1)]
    if grid[-1] > hi + 1e-12:
        grid.pop()
    return grid


def _parse_gamma_token(token: str) -> float:
    token = token.strip()
    if token in ("-inf", "-Inf", "-INF"):
        return -math.inf
    if token in ("inf", "Inf", "INF", "+inf"):
        return math.inf
    try:
        return float(token)
    except ValueError as exc:
        raise ValidationError(f"bad gamma value {token!r}") from exc


def _parse_range(spec: str) -> tuple:
    parts = spec.split(":")
    if len(parts) != 2:
        raise ValidationError(f"gamma range {spec!r} must look like lo:hi")
    lo, hi = _parse_gamma_token(parts[0]), _parse_gamma_token(parts[1])
    if lo > hi:
        raise ValidationError(f"gamma range {spec!r} out of order")
    return lo, hi


def _require(counts, kind, what: str):
    if not isinstance(counts, kind):
        raise ValidationError(
            f"{what} needs a {kind.__name__} input, got {type(counts).__name__}")
    return counts


# ---------------------------------------------------------------------------
# ate-bounds
# ---------------------------------------------------------------------------


def _run_ate(args) -> None:
    counts = load_counts(args.input, args.format)
    tokens = [] if args.assumptions == "none" else args.assumptions.split(",")
    chosen = set()
    for tok in tokens:
        try:
            chosen.add(ate.Assumption(tok.strip()))
        except ValueError:
            raise ValidationError(f"unknown assumption {tok!r} (use none|mts|mtr|mts,mtr)")

    def bound_fn(summary):
        return ate.combined_bounds(summary, chosen)

    if isinstance(counts, StratifiedCounts):
        bounds = ate.stratified_bounds(counts, bound_fn, rational=args.rational)
        naive = sum(st.weight * ate.naive_estimate(
            ate.summary_of(st.counts, rational=args.rational))
            for st in counts.strata)
    else:
        summary = ate.summary_of(counts, rational=args.rational)
        bounds = bound_fn(summary)
        naive = ate.naive_estimate(summary)

    report = {"command": "ate-bounds",
              "assumptions": sorted(a.value for a in chosen),
              "naive": naive, "bounds": bounds}
    if args.rescale:
        lo, hi = (float(v) for v in args.rescale.split(","))
        report["rescaled_bounds"] = ate.rescale_interval(bounds, lo, hi)
        report["rescale"] = [lo, hi]
    if args.gamma0 is not None or args.gamma1 is not None:
        if args.gamma0 is None or args.gamma1 is None:
            raise ValidationError("--gamma0 and --gamma1 must be given together")
        scen = ate.ConfounderScenario(gamma0=args.gamma0, gamma1=args.gamma1)
        report["bias_adjusted"] = ate.bias_adjusted_naive(naive, scen)
        if not isinstance(counts, StratifiedCounts):
            report["gamma0_feasible"] = ate.gamma0_feasible(summary, args.gamma1)
    report["provenance"] = _provenance(args)
    _emit(report, args, _render_ate)


def _render_ate(report: dict) -> str:
    lines = [_styled("ATE bounds", "1"),
             f"  assumptions : {','.join(report['assumptions']) or 'none'}",
             f"  naive       : {_fmt(report['naive'])}",
             f"  bounds      : {_fmt_interval(report['bounds'])}"]
    if "bias_adjusted" in report:
        lines.append(f"  bias-adj    : {_fmt(report['bias_adjusted'])}")
    if "gamma0_feasible" in report:
        lines.append(f"  gamma0 range: {_fmt_interval(report['gamma0_feasible'])}")
    if "rescaled_bounds" in report:
        lines.append(f"  rescaled    : {_fmt_interval(report['rescaled_bounds'])}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# principal
# ---------------------------------------------------------------------------


def _run_principal(args) -> None:
    counts = _require(load_counts(args.input, args.format), ThreeVarCounts, "principal")
    grid = _parse_grid(args.gamma_grid)
    if args.infinite_endpoints:
        grid = [-math.inf] + grid + [math.inf]
    law = empirical_law(counts)
    mono = principal.check_monotonicity(law)
    if not mono.consistent:
        raise principal.MonotonicityError(
            f"Pr[S=1|Z=1]={mono.ps1_1:.4f} > Pr[S=1|Z=0]={mono.ps1_0:.4f}")
    curve = principal.sensitivity_sweep(counts, grid)
    pid = principal.PrincipalIdentified.from_counts(counts)
    z = norm_ppf(1 - args.alpha / 2)
    rows = [{"gamma": p.gamma, "beta_hat": p.beta_hat, "se": p.se,
             "ci_lo": p.beta_hat - z * p.se, "ci_hi": p.beta_hat + z * p.se}
            for p in curve.points]
    diag = principal.check_normality_conditions(counts)
    report = {"command": "principal", "alpha": args.alpha,
              "monotonicity": {"consistent": mono.consistent,
                               "ps1_1": mono.ps1_1, "ps1_0": mono.ps1_0},
              "bounds": principal.principal_effect_bounds(pid),
              "no_selection_estimate": principal.beta_of_gamma(pid, 0.0),
              "curve": rows,
              "normality_diagnostics": {
                  "gap_upper": diag.gap_upper, "gap_lower": diag.gap_lower,
                  "pvalue_upper": diag.pvalue_upper, "pvalue_lower": diag.pvalue_lower},
              "provenance": _provenance(args)}
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(_render_principal_csv(report) + "\n")
    _emit(report, args, _render_principal, csv_renderer=_render_principal_csv)


def _render_principal_csv(report: dict) -> str:
    lines = ["gamma,beta_hat,se,ci_lo,ci_hi"]
    lines.extend(f"{r['gamma']},{r['beta_hat']!r},{r['se']!r},"
                 f"{r['ci_lo']!r},{r['ci_hi']!r}" for r in report["curve"])
    return "\n".join(lines)


def _render_principal(report: dict) -> str:
    mono = report["monotonicity"]
    lines = [_styled("Principal stratification sensitivity analysis", "1"),
             f"  monotonicity consistent: {mono['consistent']} "
             f"(Pr[S=1|Z=1]={_fmt(mono['ps1_1'])}, Pr[S=1|Z=0]={_fmt(mono['ps1_0'])})",
             f"  bounds      : {_fmt_interval(report['bounds'])}",
             f"  no-selection: {_fmt(report['no_selection_estimate'])}",
             "  gamma    beta_hat       se    ci_lo    ci_hi"]
    for r in report["curve"]:
        g = r["gamma"]
        gtxt = f"{g:7.2f}" if isinstance(g, (int, float)) and math.isfinite(g) else f"{g!s:>7}"
        lines.append(f"  {gtxt} {_fmt(r['beta_hat']):>9} {_fmt(r['se']):>8} "
                     f"{_fmt(r['ci_lo']):>8} {_fmt(r['ci_hi']):>8}")
    d = report["normality_diagnostics"]
    lines.append(f"  normality LR p-values: upper {_fmt(d['pvalue_upper'], 6)}, "
                 f"lower {_fmt(d['pvalue_lower'], 4)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------


def _gate_assumptions(spec: str) -> AssumptionSet:
    flags = dict(exclusion_restriction=False, monotonicity_S=False, monotone_Y_in_s=False)
    for tok in spec.split(","):
        tok = tok.strip()
        if tok == "er":
            flags["exclusion_restriction"] = True
        elif tok == "mono":
            flags["monotonicity_S"] = True
        elif tok == "mono-y-s":
            flags["monotone_Y_in_s"] = True
        elif tok:
            raise ValidationError(f"unknown gate assumption {tok!r} (use er,mono,mono-y-s)")
    return AssumptionSet(**flags)


def _run_gate(args) -> None:
    counts = _require(load_counts(args.input, args.format), ThreeVarCounts, "gate")
    law = empirical_law(counts, rational=args.rational)
    assumptions = _gate_assumptions(args.assumptions)
    lp = build_gate_program(law, assumptions)
    sol = solve_bounds(lp)
    closed = gate_closed_form(law)
    lp_iv = sol.interval
    agreement = (abs(float(closed.lo) - float(lp_iv.lo)) <= 1e-9
                 and abs(float(closed.hi) - float(lp_iv.hi)) <= 1e-9)
    try:
        iv_est = iv_estimand(law)
    except NumericError:
        iv_est = None
    report = {"command": "gate",
              "assumptions": args.assumptions,
              "closed_form": closed,
              "lp": lp_iv,
              "lp_matches_closed_form": agreement,
              "iv_estimand": iv_est,
              "certificates": {
                  "argmin": {str(st): q for st, q in zip(lp.space.states, sol.argmin.q) if q},
                  "argmax": {str(st): q for st, q in zip(lp.space.states, sol.argmax.q) if q},
                  "components": list(lp.space.components)},
              "provenance": _provenance(args)}
    _emit(report, args, _render_gate)


def _render_gate(report: dict) -> str:
    return "\n".join([
        _styled("Treatment-taken effect under noncompliance", "1"),
        f"  assumptions : {report['assumptions']}",
        f"  closed form : {_fmt_interval(report['closed_form'])}",
        f"  LP          : {_fmt_interval(report['lp'])} "
        f"(matches closed form: {report['lp_matches_closed_form']})",
        f"  IV estimand : {_fmt(report['iv_estimand'])}",
    ])


# ---------------------------------------------------------------------------
# mediation
# ---------------------------------------------------------------------------


def _run_mediation(args) -> None:
    counts = _require(load_counts(args.input, args.format), ThreeVarCounts, "mediation")
    law = empirical_law(counts)
    eff = mediation.mediation_effects(law, monotone=args.monotone,
                                      identified=args.identified)
    report = {"command": "mediation", "monotone": args.monotone,
              "total": eff.total,
              "nde0": eff.nde0, "nde1": eff.nde1,
              "nie0": eff.nie0, "nie1": eff.nie1,
              "provenance": _provenance(args)}
    if eff.identified_nde is not None:
        report["identified"] = {
            "nde0": eff.identified_nde[0], "nde1": eff.identified_nde[1],
            "nie0": eff.identified_nie[0], "nie1": eff.identified_nie[1]}
    _emit(report, args, _render_mediation)


def _render_mediation(report: dict) -> str:
    lines = [_styled("Mediation: natural direct/indirect effect bounds", "1"),
             f"  total : {_fmt(report['total'])}   (monotone: {report['monotone']})"]
    for key in ("nde0", "nde1", "nie0", "nie1"):
        lines.append(f"  {key}  : {_fmt_interval(report[key])}")
    if "identified" in report:
        ident = report["identified"]
        lines.append("  identified: " + ", ".join(
            f"{k}={_fmt(v)}" for k, v in ident.items()))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# msm-sim
# ---------------------------------------------------------------------------


def _run_msm(args) -> None:
    if args.cohort:
        cohort = msm.cohort_from_csv(args.cohort)
        config = {}
    else:
        if not args.config:
            raise ValidationError("msm-sim needs --config (or --cohort to reuse one)")
        with open(args.config) as fh:
            config = json.load(fh)
        spec = msm.MsmSpec(tau=int(config.get("tau", 4)),
                           beta=tuple(config.get("beta", (0.5, 1.0, 0.25, 0.75))))
        cohort = msm.simulate_cohort(
            spec,
            confounding_strength=float(config.get("confounding_strength", 0.5)),
            n=int(config.get("n", 1000)),
            seed=args.seed,
            selection_gamma=float(config.get("selection_gamma", 0.0)))
    if args.export_cohort:
        msm.cohort_to_csv(cohort, args.export_cohort)
    grid = _parse_grid(args.gamma_grid)
    sweep = msm.sensitivity_sweep_msm(cohort, grid)
    report = {"command": "msm-sim", "config": config,
              "sweep": [{"gamma": g, "eta1": e, "se": s} for g, e, s in sweep],
              "provenance": _provenance(args, {"n_subjects": len(cohort)})}
    _emit(report, args, _render_msm, csv_renderer=_render_msm_csv)


def _render_msm_csv(report: dict) -> str:
    lines = ["gamma,eta1,se"]
    lines.extend(f"{r['gamma']},{r['eta1']!r},{r['se']!r}" for r in report["sweep"])
    return "\n".join(lines)


def _render_msm(report: dict) -> str:
    lines = [_styled("MSM sensitivity sweep", "1"),
             "  gamma     eta1       se"]
    for row in report["sweep"]:
        lines.append(f"  {row['gamma']:6.2f} {_fmt(row['eta1']):>8} {_fmt(row['se']):>8}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# uncertainty
# ---------------------------------------------------------------------------


def _run_uncertainty(args) -> None:
    counts = _require(load_counts(args.input, args.format), ThreeVarCounts,
                      "uncertainty")
    ranges = [_parse_range(spec) for spec in (args.gamma_range or ["-inf:inf"])]
    finite = sorted({g for pair in ranges for g in pair if math.isfinite(g)})
    grid = []
    if any(math.isinf(g) for pair in ranges for g in pair):
        grid.append(-math.inf)
    grid.extend(finite)
    if 0.0 not in grid:
        grid.append(0.0)
    if any(math.isinf(g) for pair in ranges for g in pair):
        grid.append(math.inf)
    grid = sorted(set(grid))
    curve = principal.sensitivity_sweep(counts, grid)
    rows = []
    for pair in ranges:
        be = uncertainty.bound_estimates_from_curve(curve, pair)
        res = uncertainty.uncertainty_report(be, args.alpha)
        rows.append({"gamma_range": [pair[0], pair[1]],
                     "ignorance": res.ignorance,
                     "pointwise": res.pointwise,
                     "strong": res.strong,
                     "c_alpha": res.c_alpha,
                     "excludes_zero": res.excludes_zero()})
    report = {"command": "uncertainty", "alpha": args.alpha, "rows": rows,
              "provenance": _provenance(args)}
    if args.band:
        band_grid = _parse_grid(args.band_grid)

        def estimator(c, g):
            fit = principal.mle_fit(c, g)
            return fit.beta_hat, fit.se

        band = uncertainty.bootstrap_band(counts, estimator, band_grid,
                                          B=args.B, alpha=args.alpha, seed=args.seed)
        report["band"] = {"points": [{"gamma": g, "lo": lo, "hi": hi}
                                     for g, lo, hi in band.points],
                          "critical_value": band.critical_value,
                          "coverage": band.coverage,
                          "redrawn": band.redrawn}
    _emit(report, args, _render_uncertainty)


def _render_uncertainty(report: dict) -> str:
    lines = [_styled("Ignorance and uncertainty intervals "
                     f"(alpha={report['alpha']})", "1"),
             "  Gamma range        IR                  URp                 URs"]
    for row in report["rows"]:
        lo, hi = row["gamma_range"]
        rng = f"[{lo}, {hi}]"
        lines.append(f"  {rng:<18} {_fmt_interval(row['ignorance']):<19} "
                     f"{_fmt_interval(row['pointwise']):<19} "
                     f"{_fmt_interval(row['strong'])}")
    if "band" in report:
        lines.append(f"  sup-t band critical value: {_fmt(report['band']['critical_value'])} "
                     f"(redrawn replicates: {report['band']['redrawn']})")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partialid",
        description="Bounds, sensitivity analysis, and uncertainty intervals "
                    "for partially identified treatment effects")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="counts file")
            p.add_argument("--format", choices=("json", "csv"), default="json",
                           help="input file format")
        p.add_argument("--report", choices=("json", "text", "csv"), default="json",
                       help="report rendering")
        p.add_argument("--output", default=None, help="write the report to a file")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ate-bounds", help="ATE bounds under unknown selection")
    common(p)
    p.add_argument("--assumptions", default="none",
                   help="none|mts|mtr|mts,mtr")
    p.add_argument("--gamma0", type=float, default=None)
    p.add_argument("--gamma1", type=float, default=None)
    p.add_argument("--rescale", default=None, metavar="LO,HI",
                   help="report bounds on an outcome scale [lo,hi]")
    p.add_argument("--rational", action="store_true",
                   help="exact rational arithmetic from integer counts")
    p.set_defaults(run=_run_ate)

    p = sub.add_parser("principal", help="principal-stratum sensitivity analysis")
    common(p)
    p.add_argument("--gamma-grid", default="-5:5:0.25", dest="gamma_grid")
    p.add_argument("--infinite-endpoints", action="store_true",
                   dest="infinite_endpoints")
    p.add_argument("--csv", default=None, help="also write the curve as CSV")
    p.set_defaults(run=_run_principal)

    p = sub.add_parser("gate", help="effect of treatment taken, under noncompliance")
    common(p)
    p.add_argument("--assumptions", default="er,mono",
                   help="comma list: er, mono, mono-y-s")
    p.add_argument("--rational", action="store_true")
    p.set_defaults(run=_run_gate)

    p = sub.add_parser("mediation", help="natural direct/indirect effect bounds")
    common(p)
    p.add_argument("--monotone", action="store_true")
    p.add_argument("--identified", action="store_true",
                   help="also report the point-identified formulas")
    p.set_defaults(run=_run_mediation)

    p = sub.add_parser("msm-sim", help="longitudinal IPTW sensitivity sweep")
    common(p, needs_input=False)
    p.set_defaults(report="csv")  # plot-ready gamma,eta1,se rows by default
    p.add_argument("--config", default=None, help="simulation config JSON")
    p.add_argument("--cohort", default=None, help="import a cohort CSV instead")
    p.add_argument("--export-cohort", default=None, dest="export_cohort")
    p.add_argument("--gamma-grid", default="-1:1:0.1", dest="gamma_grid")
    p.set_defaults(run=_run_msm)

    p = sub.add_parser("uncertainty", help="ignorance/uncertainty interval report")
    common(p)
    p.add_argument("--gamma-range", action="append", dest="gamma_range",
                   metavar="LO:HI", help="repeatable; endpoints may be -inf/inf")
    p.add_argument("--band", action="store_true", help="add a sup-t bootstrap band")
    p.add_argument("--band-grid", default="-3:3:0.5", dest="band_grid")
    p.add_argument("--B", type=int, default=1000)
    p.set_defaults(run=_run_uncertainty)

    return parser


_VALUE_FLAGS = ("--gamma-grid", "--gamma-range", "--band-grid", "--rescale")


def _join_dashed_values(argv) -> list:
    """Merge `--flag -3:3:1` into `--flag=-3:3:1` so argparse accepts it."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = _build_parser().parse_args(_join_dashed_values(argv))
    try:
        args.run(args)
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PartialIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
