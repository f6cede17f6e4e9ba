"""Command line entry point: ``ermbounds <command> ...``.

Exit codes: 0 success, 1 usage error, 2 compute error, 3 partial
(non-certifying) result.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bisample import erm_revenue_enclosure, erm_revenue_mc, ratio
from .curve import CurveError, load_curve
from .gauge import Weighting
from .gridsearch import (
    default_grid, eta_grid, eta_series, full_cube_grid, polish, series_csv,
)
from .solve import BACKENDS, SolveOptions
from .sweep import RunDirError, load_report, run_lower_sweep, run_upper_sweep

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False))


def _solver_args(p: argparse.ArgumentParser, gap_default) -> None:
    p.add_argument("--backend", choices=sorted(BACKENDS), help="solver backend (default: $ERMBOUNDS_BACKEND or highs)")
    p.add_argument("--gap", type=float, default=gap_default, help="relative MIP gap")
    p.add_argument("--time-limit", type=_positive_float, help="per-model time limit in seconds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tol", type=_positive_float, default=1e-6, help="enclosure tolerance")
    p.add_argument("--out", type=Path, help="run directory (resumed if it exists)")
    p.add_argument("--k", type=int, nargs="+", dest="ks", help="restrict to these k")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ermbounds", description="Bounds on two-sample ERM revenue for regular distributions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="certified enclosure of a curve's ERM revenue")
    p.add_argument("--curve", type=Path, required=True, help="curve JSON {knots, values}")
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--ratio", action="store_true", help="divide by the optimal revenue max R")

    p = sub.add_parser("mc", help="Monte Carlo estimate of a curve's ERM revenue")
    p.add_argument("--curve", type=Path, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("upper", help="upper-bound sweep over k = 1..n+1")
    p.add_argument("--n", type=int, required=True)
    _solver_args(p, 0.002)

    p = sub.add_parser("lower", help="certified lower-bound sweep over k = 1..N")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--weighting", default="ApproxUniform", choices=[w.value for w in Weighting])
    p.add_argument("--strengthen", action="store_true", help="tightened, equivalent formulation (faster)")
    _solver_args(p, None)

    p = sub.add_parser("grid", help="grid search over three-piece curves")
    p.add_argument("--q-opt", type=_unit, help="peak quantile")
    p.add_argument("--batch", type=int, metavar="M", help="run q_opt = k/M for k = 1..M and print CSV")
    p.add_argument("--full-cube", action="store_true", help="grid the whole unit cube (step 1/40)")
    p.add_argument("--polish", action="store_true", help="local descent after the grid (non-certifying search)")
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="verify a run directory and print its aggregate")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--plot-data", action="store_true", help="print the per-k CSV series instead")

    p = sub.add_parser("selftest", help="run the built-in property checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _options(args, gap: float | None) -> SolveOptions:
    return SolveOptions(relative_gap=0.002 if gap is None else gap, time_limit=args.time_limit, backend=args.backend)


def _cmd_eval(args) -> int:
    curve = load_curve(args.curve)
    enc = ratio(curve, args.tol) if args.ratio else erm_revenue_enclosure(curve, args.tol)
    _print_json({**enc.to_dict(), "width": enc.width, "tol": args.tol, "ratio": args.ratio})
    return EXIT_OK if enc.converged else EXIT_PARTIAL


def _cmd_mc(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    mean, se = erm_revenue_mc(load_curve(args.curve), args.samples, args.seed)
    _print_json({"mean": mean, "stderr": se, "samples": args.samples, "seed": args.seed})
    return EXIT_OK


def _sweep_exit(report) -> int:
    _print_json({"run_dir": str(report.config.get("run_dir", "")), **report.aggregate})
    return EXIT_PARTIAL if report.partial else EXIT_OK


def _cmd_upper(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    out = args.out or Path("runs") / f"upper_n{args.n}"
    opts = _options(args, args.gap)
    rep = run_upper_sweep(args.n, opts, ks=args.ks, tol=args.tol, run_dir=out, workers=args.workers)
    rep.config["run_dir"] = str(out)
    return _sweep_exit(rep)


def _cmd_lower(args) -> int:
    if args.n < 2 or args.N < 2:
        raise UsageError("--n and --N must be at least 2")
    out = args.out or Path("runs") / f"lower_n{args.n}_N{args.N}_{args.weighting}"
    rep = run_lower_sweep(args.n, args.N, args.weighting, _options(args, args.gap), tiered=args.gap is None,
                          strengthen=args.strengthen, ks=args.ks, tol=args.tol, run_dir=out, workers=args.workers)
    rep.config["run_dir"] = str(out)
    return _sweep_exit(rep)


def _cmd_grid(args) -> int:
    grid = full_cube_grid() if args.full_cube else default_grid()
    if args.batch:
        results = eta_series([k / args.batch for k in range(1, args.batch + 1)], grid, args.tol, workers=args.workers)
        if args.polish:
            results = [polish(r, args.tol) for r in results]
        sys.stdout.write(series_csv(results))
        return EXIT_OK
    if args.q_opt is None:
        raise UsageError("give --q-opt or --batch")
    res = eta_grid(args.q_opt, grid, args.tol, workers=args.workers)
    if args.polish:
        res = polish(res, args.tol)
    _print_json(res.to_dict())
    return EXIT_OK


def _cmd_report(args) -> int:
    rep = load_report(args.run_dir)
    if args.plot_data:
        sys.stdout.write(rep.plot_csv())
    else:
        _print_json({**rep.aggregate, "total_runtime": rep.total_runtime})
    return EXIT_PARTIAL if rep.partial else EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.seed)
    for c in results:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name:<26} {c.seconds:6.1f}s  {c.detail}")
    return EXIT_OK if all(c.ok for c in results) else EXIT_COMPUTE


COMMANDS = {
    "eval": _cmd_eval,
    "mc": _cmd_mc,
    "upper": _cmd_upper,
    "lower": _cmd_lower,
    "grid": _cmd_grid,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ermbounds {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CurveError, OSError, json.JSONDecodeError) as exc:
        print(f"ermbounds {args.command}: bad input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunDirError as exc:
        print(f"ermbounds {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except KeyboardInterrupt:
        print("interrupted; finished k values are checkpointed", file=sys.stderr)
        return EXIT_PARTIAL
    except Exception as exc:
        print(f"ermbounds {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
