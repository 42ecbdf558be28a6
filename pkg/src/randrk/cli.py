"""Command-line front end: integrate, converge, stability, stiff-demo.

Exit codes: 0 success, 1 numerical failure, 2 usage error.  All file output
is CSV (17 significant digits, `inf` literal allowed) written atomically;
SVG contour figures are a pure function of the same data.  Step-size flags
accept exact fractions like 1/8 as well as decimals.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from . import svgplot
from .experiments import (DegenerateFit, NotOnReferenceGrid, convergence_order,
                          stiff_demo)
from .ivp import FixedTau, SchemeId, dahlquist, holder_problem, make_grid, stiff_problem, tau_stream
from .schemes import StageSolverConfig, StageSolverError, integrate
from .stability import (EmptyContour, NonIntegrable, PoleAtStage, classify_point,
                        contour_extract, find_ms_interval_endpoint, ms_interval_gap,
                        scan_region)

_NUMERICAL_ERRORS = (StageSolverError, PoleAtStage, NonIntegrable, EmptyContour,
                     DegenerateFit, NotOnReferenceGrid, np.linalg.LinAlgError)

_SCHEME_CHOICES = [s.value for s in SchemeId]


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path: str, text: str):
    """Write via a temp file in the same directory so readers never see a torn file."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def parse_fraction(s: str) -> Fraction:
    """Exact step size: '1/8' or a decimal literal like '0.125'."""
    return Fraction(s.strip())


def _fraction_slug(f: Fraction) -> str:
    return f"{f.numerator}-{f.denominator}" if f.denominator != 1 else str(f.numerator)


def _build_problem(args):
    if args.problem == "dahlquist":
        return dahlquist(args.lam, t1=args.b if args.b is not None else 1.0)
    if args.problem == "stiff":
        return stiff_problem(t1=args.b if args.b is not None else 50.0)
    if args.problem == "holder":
        return holder_problem(lam=args.lam.real, exponent=args.rho, kink=args.kink,
                              t1=args.b if args.b is not None else 1.0)
    raise ValueError(f"unknown problem {args.problem!r}")


def _solver_config(args) -> StageSolverConfig:
    return StageSolverConfig(method=args.solver, tol=args.tol, max_iter=args.max_iter)


def _usage_error(parser, message: str) -> int:
    print(f"usage error: {message}", file=sys.stderr)
    parser.print_usage(sys.stderr)
    return 2


def config_argv(args) -> list[str]:
    """Canonical flag list reproducing this parsed configuration."""
    parts = [args.command]
    for action in args._parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        val = getattr(args, action.dest, None)
        if val is None:
            continue
        flag = action.option_strings[0]
        if isinstance(val, bool):
            if val:
                parts.append(flag)
        elif isinstance(val, (list, tuple)):
            parts.append(flag)
            parts.extend(str(v) for v in val)
        else:
            parts.append(flag)
            parts.append(str(val))
    return parts


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------


def cmd_integrate(args, parser) -> int:
    scheme = SchemeId(args.scheme)
    if args.a != 0.0:
        return _usage_error(parser, "built-in problems start at t = 0; --a must be 0")
    if scheme.randomized and args.tau_fixed is None and args.seed is None:
        return _usage_error(parser, f"scheme {scheme.value} needs --seed (or --tau-fixed)")

    ivp = _build_problem(args)
    grid = make_grid(0.0, ivp.t1, args.n)
    if scheme.randomized:
        taus = FixedTau(args.tau_fixed) if args.tau_fixed is not None else tau_stream(args.seed, args.path)
    else:
        taus = None
    traj = integrate(ivp, scheme, grid, taus, _solver_config(args))

    cols = ["V"] if ivp.dim == 1 else [f"V{i}" for i in range(ivp.dim)]
    lines = ["t," + ",".join(cols) + ",tau"]
    t = grid.times()
    for j in range(grid.n + 1):
        if j == 0:
            tau_cell = ""
        elif scheme.randomized:
            tau_cell = _fmt(traj.taus[j - 1])
        else:
            tau_cell = _fmt(0.5)  # fixed stage fraction of the deterministic maps
        lines.append(",".join([_fmt(t[j])] + [_fmt(v) for v in traj.states[j]] + [tau_cell]))

    out = args.out or f"trajectory_{scheme.value}.csv"
    path = os.path.join(args.outdir, out)
    os.makedirs(args.outdir, exist_ok=True)
    atomic_write_text(path, "\n".join(lines) + "\n")

    final = ", ".join(_fmt(v) for v in traj.states[-1])
    print(f"config: {' '.join(config_argv(args))}")
    print(f"wrote {path}")
    print(f"final state: [{final}]  max stage iterations: {int(traj.stage_iters.max(initial=0))}")
    return 0


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------


def cmd_converge(args, parser) -> int:
    if args.levels < 3:
        return _usage_error(parser, "need at least 3 levels for an order fit")
    scheme = SchemeId(args.scheme)
    if scheme.randomized and args.seed is None:
        return _usage_error(parser, f"scheme {scheme.value} needs --seed")

    ivp = _build_problem(args)
    h0 = parse_fraction(args.h0)
    h_list = [float(h0) / 2 ** k for k in range(args.levels)]
    fit = convergence_order(ivp, scheme, h_list, args.paths, args.p,
                            args.seed if args.seed is not None else 0, _solver_config(args))

    os.makedirs(args.outdir, exist_ok=True)
    rows = ["scheme,h,p,paths,value,std_error"]
    for h, est in fit.levels:
        rows.append(",".join([scheme.value, _fmt(h), _fmt(est.p), str(est.paths),
                              _fmt(est.value), _fmt(est.std_error)]))
    atomic_write_text(os.path.join(args.outdir, f"convergence_{scheme.value}.csv"),
                      "\n".join(rows) + "\n")
    atomic_write_text(os.path.join(args.outdir, f"fit_{scheme.value}.csv"),
                      "scheme,slope,intercept,r2\n"
                      + ",".join([scheme.value, _fmt(fit.slope), _fmt(fit.intercept),
                                  _fmt(fit.r2)]) + "\n")

    rate = args.rate if args.rate is not None else (ivp.holder or 1.0) + 0.5
    print(f"config: {' '.join(config_argv(args))}")
    print(f"slope = {fit.slope:.4f}  intercept = {fit.intercept:.4f}  r2 = {fit.r2:.5f}")
    print(f"theoretical rate = {rate:.4f}")
    if fit.slope < rate - 0.15:
        print("verdict: FAIL (slope below the acceptance window)")
    elif fit.slope <= rate + 0.25:
        print("verdict: PASS")
    else:
        print("verdict: PASS (slope above the window: deterministic error component dominates)")
    return 0


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def cmd_stability(args, parser) -> int:
    if args.mode == "interval":
        x0 = find_ms_interval_endpoint()
        gap = ms_interval_gap(-x0)
        print(f"x0 = {x0:.12f}")
        print(f"mean-square interval on the real axis: (-x0, 0), 4.03 < x0 < 4.04: "
              f"{'OK' if 4.03 < x0 < 4.04 else 'VIOLATED'}")
        print(f"|gap(-x0)| = {abs(gap):.3e}")
        return 0

    if args.mode == "point":
        if args.re is None or args.im is None:
            return _usage_error(parser, "--mode point needs --re and --im")
        v = classify_point(complex(args.re, args.im))
        print(f"z = {v.z.real:g} + {v.z.imag:g}i")
        print(f"ms_value = {_fmt(v.ms_value)}")
        print(f"as_value = {_fmt(v.as_value)}")
        print(f"in_ms = {str(v.in_ms).lower()}  on_ms_boundary = {str(v.on_ms_boundary).lower()}")
        print(f"in_as_sp = {str(v.in_as_sp).lower()}  in_det_ref = {str(v.in_det_ref).lower()}")
        return 0

    # region scan
    rect = tuple(args.window)
    grid = scan_region(rect, args.nx, args.ny, args.functional)
    level = args.level if args.level is not None else grid.level
    os.makedirs(args.outdir, exist_ok=True)

    rows = ["re,im,value"]
    re_ax, im_ax = grid.re_axis, grid.im_axis
    for i in range(grid.nx):
        for j in range(grid.ny):
            rows.append(f"{_fmt(re_ax[i])},{_fmt(im_ax[j])},{_fmt(grid.values[i, j])}")
    atomic_write_text(os.path.join(args.outdir, f"region_{args.functional}.csv"),
                      "\n".join(rows) + "\n")

    try:
        contours = contour_extract(grid, level)
    except EmptyContour as exc:
        if args.svg and not args.allow_empty:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        contours = []

    crows = ["polyline_id,re,im"]
    for pid, line in enumerate(contours):
        for x, y in line:
            crows.append(f"{pid},{_fmt(x)},{_fmt(y)}")
    atomic_write_text(os.path.join(args.outdir, f"contour_{args.functional}.csv"),
                      "\n".join(crows) + "\n")

    if args.svg:
        label = ("mean-square gain = 1" if args.functional == "ms" else "log-gain = 0")
        color = "#1f4e9c" if args.functional == "ms" else "#777777"
        doc = svgplot.svg_document([(label, color, contours)], rect,
                                   title=f"{args.functional} stability region boundary")
        atomic_write_text(os.path.join(args.outdir, args.svg), doc)

    print(f"config: {' '.join(config_argv(args))}")
    print(f"scanned {grid.nx}x{grid.ny} lattice, {len(contours)} contour polyline(s) at level {level:g}")
    return 0


# ---------------------------------------------------------------------------
# stiff-demo
# ---------------------------------------------------------------------------


def cmd_stiff_demo(args, parser) -> int:
    if args.schemes == "all":
        schemes = list(SchemeId)
    else:
        try:
            schemes = [SchemeId(s.strip()) for s in args.schemes.split(",")]
        except ValueError as exc:
            return _usage_error(parser, str(exc))
    h_fracs = [parse_fraction(s) for s in args.h.split(",")]

    os.makedirs(args.outdir, exist_ok=True)
    summary = ["scheme,h,path,max_error,finite"]
    written = 0
    for scheme in schemes:
        # sample paths are the point of the implicit randomized pair; the
        # explicit randomized scheme explodes identically on every path
        npaths = args.paths if scheme in (SchemeId.S1, SchemeId.S2) else 1
        for hf in h_fracs:
            results = stiff_demo(scheme, float(hf), n_paths=npaths, seed=args.seed)
            for res in results:
                lines = ["t,V,exact,error"]
                for j in range(len(res.t)):
                    lines.append(",".join([_fmt(res.t[j]), _fmt(res.values[j]),
                                           _fmt(res.exact[j]), _fmt(res.error[j])]))
                name = f"stiff_{scheme.value}_{_fraction_slug(hf)}_path{res.path}.csv"
                atomic_write_text(os.path.join(args.outdir, name), "\n".join(lines) + "\n")
                written += 1
                summary.append(",".join([scheme.value, _fmt(res.h), str(res.path),
                                         _fmt(res.max_error), str(res.finite).lower()]))
    atomic_write_text(os.path.join(args.outdir, "summary.csv"), "\n".join(summary) + "\n")

    print(f"config: {' '.join(config_argv(args))}")
    print(f"wrote {written} path files + summary.csv to {args.outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_problem_flags(sub):
    sub.add_argument("--problem", choices=["dahlquist", "stiff", "holder"], default="dahlquist")
    sub.add_argument("--lambda", dest="lam", type=complex, default=complex(-1),
                     help="problem coefficient; complex values via --lambda=-1+2j")
    sub.add_argument("--rho", type=float, default=0.5, help="time regularity exponent (holder)")
    sub.add_argument("--kink", type=float, default=0.5, help="forcing kink location (holder)")
    sub.add_argument("--b", type=float, default=None, help="right interval endpoint (problem default)")


def _add_solver_flags(sub):
    sub.add_argument("--solver", choices=["picard", "affine", "newton"], default="picard")
    sub.add_argument("--tol", type=float, default=1e-12)
    sub.add_argument("--max-iter", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randrk",
        description="Randomized implicit two-stage Runge-Kutta schemes: "
                    "integration, convergence studies, stability regions, stiff benchmark.")
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("integrate", help="run one trajectory and write it as CSV")
    _add_problem_flags(p)
    p.add_argument("--scheme", choices=_SCHEME_CHOICES, required=True)
    p.add_argument("--a", type=float, default=0.0, help="left endpoint (must be 0)")
    p.add_argument("--n", type=int, default=100, help="number of steps")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--path", type=int, default=0, help="path index within the seed")
    p.add_argument("--tau-fixed", type=float, default=None,
                   help="pin every tau draw to this value")
    _add_solver_flags(p)
    p.add_argument("--outdir", default=".")
    p.add_argument("--out", default=None, help="output file name")
    p.set_defaults(func=cmd_integrate, _parser=p)

    p = subs.add_parser("converge", help="empirical convergence order over dyadic step sizes")
    _add_problem_flags(p)
    p.set_defaults(problem="holder", lam=complex(-2))
    p.add_argument("--scheme", choices=_SCHEME_CHOICES, default="s1")
    p.add_argument("--h0", default="1/16", help="coarsest step size (fraction or decimal)")
    p.add_argument("--levels", type=int, default=6, help="number of halvings (>= 3)")
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--p", type=float, default=2.0, help="error norm exponent (>= 2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=None,
                   help="theoretical rate for the verdict (default: holder exponent + 1/2)")
    _add_solver_flags(p)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_converge, _parser=p)

    p = subs.add_parser("stability", help="stability functionals, interval endpoint, region scans")
    p.add_argument("--mode", choices=["region", "interval", "point"], default="region")
    p.add_argument("--re", type=float, default=None)
    p.add_argument("--im", type=float, default=None)
    p.add_argument("--functional", choices=["ms", "as"], default="ms")
    p.add_argument("--window", type=float, nargs=4, default=[-6.0, 1.0, -4.0, 4.0],
                   metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--nx", type=int, default=701)
    p.add_argument("--ny", type=int, default=801)
    p.add_argument("--level", type=float, default=None,
                   help="contour level (default 1 for ms, 0 for as)")
    p.add_argument("--svg", default=None, help="also render the contours to this SVG file")
    p.add_argument("--allow-empty", action="store_true",
                   help="render axes-only SVG when the contour is empty")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_stability, _parser=p)

    p = subs.add_parser("stiff-demo", help="stiff benchmark tables for all schemes")
    p.add_argument("--schemes", default="all", help="comma list of scheme ids, or 'all'")
    p.add_argument("--h", default="1/2,1/4,1/8", help="comma list of step sizes (fractions)")
    p.add_argument("--paths", type=int, default=3,
                   help="sample paths for s1/s2 (other schemes always run one)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_stiff_demo, _parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args, args._parser)
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
