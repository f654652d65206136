"""Command-line front end.

Subcommands::

    affinelab check    [SPEC] [--spec FILE|TEXT | --family ID] ...
    affinelab classify [SPEC] [--spec FILE|TEXT | --family ID] ...
    affinelab family   --id ID [--n N] [--c C] [--const k=v] [--emit FILE] [--classify]
    affinelab scan     --family ID [--n N] --grid c=0.1,0.2 [--grid c1=...]

Exit status: 0 when every check passes, 1 when a residual exceeds its
tolerance (or ``classify`` cannot classify), 2 for input or parameter
errors, 3 for numerical failures such as non-convex points.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import os
import platform
import sys
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .classify import (DEFAULT_TOL, IDENTITY_KEYS, PointRecord, StructureReport, Tolerances, classify,
                       sample_points)
from .dsl import ImmersionSpec, parse_immersion
from .errors import AffineLabError, InputError, ParameterError
from .families import FAMILY_IDS, WARPED, FamilyParams, builtin, canonical_id, family_text, fiber_spec

EXIT_OK, EXIT_TOL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


# --------------------------------------------------------------------------
# config

def _parse_kv(items: Sequence[str] | None, what: str) -> dict[str, str]:
    out = {}
    for item in items or ():
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise ParameterError(f"{what} expects key=value, got '{part}'")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _float(v: str, what: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ParameterError(f"{what}: '{v}' is not a number") from None


def tolerances(items: Sequence[str] | None) -> Tolerances:
    names = {f.name for f in dataclasses.fields(Tolerances)}
    kv = _parse_kv(items, "--tol")
    bad = set(kv) - names
    if bad:
        raise ParameterError(f"unknown tolerance(s) {sorted(bad)}; known: {sorted(names)}")
    return dataclasses.replace(DEFAULT_TOL, **{k: _float(v, "--tol") for k, v in kv.items()})


def family_params(fid: str, n: int, c: float | None, consts: Sequence[str] | None) -> FamilyParams:
    kv = {k: _float(v, "--const") for k, v in _parse_kv(consts, "--const").items()}
    return FamilyParams(fid, n, c, kv)


def load_spec(args) -> tuple[ImmersionSpec, ImmersionSpec | None, str]:
    """Spec, fiber (families only) and a label describing the source."""
    sources = [s for s in (args.spec_file, args.spec, args.family) if s]
    if len(sources) != 1:
        raise InputError("give exactly one of a spec file, --spec or --family")
    if args.family:
        p = family_params(args.family, args.n, args.c, args.const)
        spec = builtin(p.family_id, args.n, p)
        fib = fiber_spec(p.family_id, args.n, p.c) if p.family_id in WARPED else None
        return spec, fib, f"family:{p.family_id}"
    src = args.spec_file or args.spec
    if os.path.exists(src):
        with open(src, encoding="utf-8") as fh:
            return parse_immersion(fh.read()), None, f"file:{src}"
    if args.spec_file:
        raise InputError(f"spec file '{src}' not found")
    return parse_immersion(src), None, "inline"


def sample(spec: ImmersionSpec, points: str | None, seed: int) -> np.ndarray:
    """``N`` quasi-random points, ``grid:K`` (K per axis) or ``a,b,c;d,e,f`` explicit points."""
    n = spec.chart_dim
    if points is None:
        return sample_points(spec, 25, seed)
    points = points.strip()
    if points.startswith("grid:"):
        k = int(_float(points[5:], "--points"))
        if k < 1:
            raise ParameterError("grid size must be >= 1")
        box = spec.box()
        axes = [np.linspace(lo, hi, k + 2)[1:-1] for lo, hi in box]
        return np.array(list(itertools.product(*axes)))
    if ";" in points or "," in points:
        rows = [[_float(x, "--points") for x in row.split(",")] for row in points.split(";") if row.strip()]
        if any(len(r) != n for r in rows):
            raise ParameterError(f"each point needs {n} coordinates")
        return np.array(rows, dtype=float)
    count = int(_float(points, "--points"))
    if count < 1:
        raise ParameterError("--points must be >= 1")
    return sample_points(spec, count, seed)


# --------------------------------------------------------------------------
# reports

def clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def versions() -> dict:
    return {"affinelab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def failed_checks(records: Sequence[PointRecord], tol: Tolerances) -> list[str]:
    bad = set()
    for r in records:
        if not r.ok:
            continue
        for k in IDENTITY_KEYS:
            v = r.residuals.get(k)
            if v is not None and v >= tol.identity:
                bad.add(k)
        if r.semiparallel is not None and r.semiparallel >= tol.zero:
            bad.add("semiparallel")
    return sorted(bad)


def aggregate(records: Sequence[PointRecord], tol: Tolerances) -> dict:
    good = [r for r in records if r.ok]
    res = {}
    for k in IDENTITY_KEYS:
        vals = [r.residuals.get(k) for r in good if r.residuals.get(k) is not None]
        res[k] = max(vals) if vals else None
    mx = lambda name: max((getattr(r, name) for r in good if getattr(r, name) is not None), default=None)
    counts = lambda name: sorted({len(getattr(r, name)) for r in good if getattr(r, name) is not None})
    return {
        "points": len(records), "failed_points": len(records) - len(good),
        "residual_max": res,
        "semiparallel_max": mx("semiparallel"), "weyl_max": mx("weyl_norm"), "cubic_form_max": mx("C_norm"),
        "curvature_max": mx("R_norm"),
        "H_range": [min((r.H for r in good), default=None), max((r.H for r in good), default=None)],
        "J_range": [min((r.J for r in good), default=None), max((r.J for r in good), default=None)],
        "schouten_eigenvalue_counts": counts("P_values"),
        "shape_eigenvalue_counts": counts("S_values"),
        "failed_checks": failed_checks(records, tol),
    }


def exit_status(records: Sequence[PointRecord], tol: Tolerances) -> int:
    if any(not r.ok for r in records):
        return EXIT_NUMERIC
    return EXIT_TOL if failed_checks(records, tol) else EXIT_OK


def render_text(report: dict) -> str:
    lines = []
    cfg = report["config"]
    lines.append(f"{cfg['command']}: {cfg['source']} (n = {cfg['n']}, order = {cfg['order']}, "
                 f"{len(report['per_point'])} points, seed = {cfg['seed']})")
    head = f"{'#':>3} {'H':>13} {'J':>13} {'|C|':>10} {'|R.C|':>10} {'m':>2} {'sig':>3}  status"
    lines.append(head)
    for p in report["per_point"]:
        if not p["ok"]:
            lines.append(f"{p['index']:>3} {'':>13} {'':>13} {'':>10} {'':>10} {'':>2} {'':>3}  "
                         f"{p['error_code']}: {p['error']}")
            continue
        m = len(p["P_values"]) if p["P_values"] is not None else "-"
        lines.append(f"{p['index']:>3} {p['H']:>13.6g} {p['J']:>13.6g} {p['C_norm']:>10.3g} "
                     f"{p['semiparallel']:>10.3g} {m:>2} {len(p['S_values']):>3}  ok")
    agg = report["aggregate"]
    if agg:
        lines.append("residual maxima:")
        for k, v in agg["residual_max"].items():
            lines.append(f"  {k:<24} {'n/a' if v is None else format(v, '.3e')}")
        lines.append(f"  {'semiparallel':<24} {agg['semiparallel_max'] if agg['semiparallel_max'] is None else format(agg['semiparallel_max'], '.3e')}")
        lines.append("failed checks: " + (", ".join(agg["failed_checks"]) or "none"))
    if report.get("verdict"):
        v = report["verdict"]
        lines.append(f"verdict: {v['verdict']}  ({v['verdict_evidence']})")
    if report.get("error"):
        lines.append(f"error [{report['error']['code']}]: {report['error']['message']}")
    lines.append(f"exit status: {report['exit_status']}")
    return "\n".join(lines) + "\n"


def emit(report: dict, args) -> None:
    report = clean(report)
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    else:
        text = render_text(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not args.report or args.format == "text":
        sys.stdout.write(text)


def _config(args, source, n) -> dict:
    return {"command": args.command, "source": source, "n": n, "order": args.order, "seed": args.seed,
            "points": args.points, "tol": dataclasses.asdict(tolerances(args.tol))}


# --------------------------------------------------------------------------
# commands

def run_analysis(args) -> tuple[dict, int]:
    tol = tolerances(args.tol)
    if args.order < 4:
        raise InputError(f"jet order must be >= 4, got {args.order}")
    spec, fib, source = load_spec(args)
    pts = sample(spec, args.points, args.seed)
    report, records, warped = classify(spec, pts, order=args.order, tol=tol, workers=args.workers, fiber=fib)
    status = exit_status(records, tol)
    out = {"config": _config(args, source, spec.chart_dim),
           "per_point": [r.to_dict() for r in records],
           "aggregate": aggregate(records, tol), "verdict": None, "versions": versions()}
    if args.command == "classify":
        out["verdict"] = report.to_dict()
        out["aggregate"]["warped_checks"] = warped
        if status == EXIT_OK and report.verdict == "Unclassified":
            status = EXIT_TOL
    out["exit_status"] = status
    return out, status


def run_family(args) -> tuple[dict | None, int]:
    p = family_params(args.id, args.n, args.c, args.const)
    text = family_text(p.family_id, args.n, p)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not args.classify:
        if not args.emit:
            sys.stdout.write(text)
        return None, EXIT_OK
    ns = argparse.Namespace(**vars(args))
    ns.command, ns.spec_file, ns.spec, ns.family = "classify", None, None, p.family_id
    return run_analysis(ns)


def run_scan(args) -> tuple[dict, int]:
    fid = canonical_id(args.family)
    grid = {}
    for item in args.grid or ():
        k, _, vals = item.partition("=")
        if not vals:
            raise ParameterError(f"--grid expects key=v1,v2,..., got '{item}'")
        grid[k.strip()] = [_float(v, "--grid") for v in vals.split(",") if v.strip()]
    if not grid:
        raise ParameterError("scan needs at least one --grid")
    tol = tolerances(args.tol)
    keys = list(grid)
    rows, status = [], EXIT_OK
    for combo in itertools.product(*(grid[k] for k in keys)):
        setting = dict(zip(keys, combo))
        c = setting.get("c", args.c)
        consts = {k: v for k, v in setting.items() if k != "c"}
        row: dict[str, Any] = {"params": setting}
        try:
            base = {k: _float(v, "--const") for k, v in _parse_kv(args.const, "--const").items()}
            p = FamilyParams(fid, args.n, c, {**base, **consts})
            spec = builtin(fid, args.n, p)
            fib = fiber_spec(fid, args.n, p.c) if fid in WARPED else None
            pts = sample(spec, args.points, args.seed)
            rep, records, _ = classify(spec, pts, order=args.order, tol=tol, workers=args.workers, fiber=fib)
            row.update(verdict=rep.verdict, m=rep.m, sigma=rep.sigma, c=rep.c,
                       semiparallel=rep.semiparallel_residual, status=exit_status(records, tol))
        except AffineLabError as exc:
            row.update(verdict=None, error={"code": exc.code, "message": str(exc)}, status=exc.exit_status)
        status = max(status, row["status"])
        rows.append(row)
    out = {"config": {"command": "scan", "source": f"family:{fid}", "n": args.n, "order": args.order,
                      "seed": args.seed, "points": args.points, "grid": grid},
           "per_point": [], "aggregate": {"rows": rows}, "verdict": None, "versions": versions(),
           "exit_status": status}
    return out, status


def render_scan(report: dict) -> str:
    lines = [f"scan {report['config']['source']} n = {report['config']['n']}"]
    for row in report["aggregate"]["rows"]:
        params = ", ".join(f"{k}={v:g}" for k, v in row["params"].items())
        what = row["verdict"] or f"error [{row['error']['code']}] {row['error']['message']}"
        lines.append(f"  {params:<28} {what}")
    lines.append(f"exit status: {report['exit_status']}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affinelab", description="Equiaffine hypersurface laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, spec_source=True):
        if spec_source:
            p.add_argument("spec_file", nargs="?", help=".sdl file")
            p.add_argument("--spec", help="spec file or inline DSL text")
            p.add_argument("--family", help=f"built-in id: {', '.join(FAMILY_IDS)}")
        p.add_argument("--n", type=int, default=3, help="dimension for built-ins (default 3)")
        p.add_argument("--c", type=float, default=None, help="fiber/quadric curvature")
        p.add_argument("--const", action="append", help="family constants, e.g. c1=1,c2=0.5")
        p.add_argument("--points", default=None, help="count, grid:K, or 'a,b,c;d,e,f' (default 25)")
        p.add_argument("--order", type=int, default=5, help="jet order (default 5)")
        p.add_argument("--tol", action="append", help="tolerance overrides, e.g. identity=1e-8")
        p.add_argument("--report", help="write the report to this path")
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
        p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    common(sub.add_parser("check", help="structure-equation and semi-parallelism residuals"))
    common(sub.add_parser("classify", help="residuals plus the classification verdict"))
    fam = sub.add_parser("family", help="materialize a built-in immersion")
    fam.add_argument("--id", required=True)
    fam.add_argument("--emit", help="write the DSL text here")
    fam.add_argument("--classify", action="store_true", help="also classify it")
    common(fam, spec_source=False)
    scan = sub.add_parser("scan", help="classify a family over a parameter grid")
    scan.add_argument("--family", required=True)
    scan.add_argument("--grid", action="append", help="c=0.1,0.2 or c1=1,2 (cartesian product)")
    common(scan, spec_source=False)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report: dict | None = None
    try:
        if args.command in ("check", "classify"):
            report, status = run_analysis(args)
        elif args.command == "family":
            report, status = run_family(args)
        else:
            report, status = run_scan(args)
            if args.format == "text":
                text = render_scan(clean(report))
                if args.report:
                    with open(args.report, "w", encoding="utf-8") as fh:
                        fh.write(text)
                sys.stdout.write(text)
                return status
    except AffineLabError as exc:
        status = exc.exit_status
        report = {"config": {"command": args.command, "source": None, "n": getattr(args, "n", None),
                             "order": getattr(args, "order", None), "seed": getattr(args, "seed", None)},
                  "per_point": [], "aggregate": {}, "verdict": None, "versions": versions(),
                  "error": {"code": exc.code, "message": str(exc)}, "exit_status": status}
        print(f"affinelab: error [{exc.code}]: {exc}", file=sys.stderr)
    if report is not None:
        emit(report, args)
    return status


if __name__ == "__main__":
    sys.exit(main())
