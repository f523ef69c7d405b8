"""Command-line interface.

Exit codes: 0 success, 1 usage or input-parsing error, 2 computational
failure (degenerate or failed fit).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, simulation
from .core import DataError, GuardError, RobsparseError, load_csv, normalize_columns, read_csv_matrix, resolve_column
from .robust import estimating_equation_residual
from .selection import PipelineConfig, bic_terms, full_pipeline
from .simulation import MonteCarloConfig, rows_to_csv
from .thresholding import RULE_KINDS, get_rule

OUTPUT_DIR_ENV = "ROBSPARSE_OUTPUT_DIR"

EPILOG = (
    "exit codes: 0 = success, 1 = usage or input parsing error, "
    "2 = computational failure (degenerate or failed fit). "
    f"Default output directory for 'reproduce' comes from ${OUTPUT_DIR_ENV}, else the current directory."
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _rule_arg(text):
    try:
        return get_rule(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown rule {text!r}; valid names: {', '.join(RULE_KINDS)} (optionally 'scad:a=3.7')"
        ) from None


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fmt(x):
    return f"{x:.10g}"


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float)]


def _ints(a):
    return [int(v) for v in np.asarray(a)]


def build_report(dataset, result, rule, args=None):
    fit, prelim, weights = result.fit, result.prelim, result.weights
    fit_term, complexity = bic_terms(dataset, fit.beta, fit.gamma)
    return {
        "rule": rule.name,
        "n": dataset.n,
        "p": dataset.p,
        "beta": _floats(dataset.to_original_units(fit.beta)),
        "beta_normalized": _floats(fit.beta),
        "column_scales": _floats(dataset.column_scales),
        "gamma": _floats(fit.gamma),
        "support_beta": _ints(fit.support_beta),
        "support_gamma": _ints(fit.support_gamma),
        "tuning": {
            "lambda_beta": fit.tuning.lambda_beta,
            "lambda_gamma": fit.tuning.lambda_gamma,
            "lambda_theta": fit.tuning.lambda_theta,
            "tau_theta": fit.tuning.tau_theta,
        },
        "bic": {"fit_term": fit_term, "complexity_term": complexity, "total": fit_term + complexity},
        "iterations": fit.iterations,
        "converged": fit.converged,
        "objective_trace": [float(v) for v in fit.objective_trace],
        "estimating_equation_residual": estimating_equation_residual(dataset, fit, rule, fit.tuning, weights),
        "preliminary": {
            "variant": result.config.prelim,
            "lambda_theta": prelim.lambda_theta,
            "tau_theta": prelim.tau_theta,
            "S_tilde": _ints(prelim.S_tilde),
            "G_tilde": _ints(prelim.G_tilde),
            "bic": prelim.bic,
        },
        "weights": {
            "R_w": weights.R_w,
            "w_beta": _floats(weights.w_beta),
            "w_gamma": _floats(weights.w_gamma),
        },
        "grids": result.grids,
        "config": result.config.as_dict(),
        "seed": getattr(args, "seed", None),
    }


def cmd_fit(args):
    try:
        dataset = load_csv(args.input, args.response, not args.no_header)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    except DataError as exc:
        raise UsageError(str(exc)) from None
    config = PipelineConfig(prelim=args.prelim, R_w=args.rw, grid_size=args.grid_size,
                            stop_tol=args.stop_tol, max_outer=args.max_outer)
    result = full_pipeline(dataset, args.rule, config)
    report = build_report(dataset, result, args.rule, args)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def cmd_reproduce(args):
    out_dir = Path(args.out or os.environ.get(OUTPUT_DIR_ENV) or ".")
    pipeline = PipelineConfig(grid_size=args.grid_size)
    what = args.target
    if what in ("table1", "table2"):
        config = MonteCarloConfig(pipeline=pipeline, grid_size=args.grid_size)
        rows, failures = simulation.reproduce_table(what, args.reps, args.seed, args.full_scale,
                                                    config=config, jobs=args.jobs)
        text = rows_to_csv(rows)
    elif what == "figure1":
        config = MonteCarloConfig(pipeline=pipeline, grid_size=args.grid_size, baselines=False)
        rows, failures = simulation.reproduce_figure1(args.reps, args.seed, config=config, jobs=args.jobs)
        text = rows_to_csv(rows, ("prelim", "outlier_pct", "support_size", "coverage"))
    else:
        config = MonteCarloConfig(pipeline=pipeline, grid_size=args.grid_size, baselines=False)
        rows, failures = simulation.reproduce_figure2(args.reps, args.seed, args.full_scale, config=config,
                                                      jobs=args.jobs)
        text = rows_to_csv(rows, ("rule", "magnitude", "sq_l2_error", "fp", "tp"))
    _write(out_dir / f"{what}.csv", text)
    if failures:
        print(f"warning: {failures} replication(s) failed and were excluded from the means", file=sys.stderr)
    return 0


def _parse_range(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--range expects lo:hi:step, got {text!r}") from None
    if not step > 0:
        raise UsageError(f"step must be positive, got {step:g}")
    if hi < lo:
        raise UsageError(f"empty range: hi ({hi:g}) < lo ({lo:g})")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def cmd_curves(args):
    if args.lam < 0:
        raise UsageError("--lambda must be nonnegative")
    z = _parse_range(args.range)
    rule = args.rule
    lines = ["z,theta,psi,Psi"]
    for zi in z:
        th = float(rule.theta(zi, args.lam))
        lines.append(",".join(_fmt(v) for v in (zi, th, zi - th, rule.robust_loss(zi, args.lam))))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_diagnostics(args):
    try:
        header, values = read_csv_matrix(args.input, not args.no_header)
        if args.response is not None:
            values = np.delete(values, resolve_column(header, args.response), axis=1)
        X = values if args.raw else normalize_columns(values)[0]
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    except DataError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = diagnostics.eigen_report(X, args.u, args.uprime, args.kappa)
    except (GuardError, ValueError) as exc:
        raise UsageError(f"{exc} (limits: p <= {diagnostics.MAX_P}, n <= {diagnostics.MAX_N}, "
                         f"at most {diagnostics.MAX_BLOCKS} eigenproblems)") from None
    text = json.dumps(report.as_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def make_parser():
    parser = _Parser(prog="robsparse", description="Sparse regression robust to response outliers.",
                     epilog=EPILOG)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a CSV dataset", epilog=EPILOG)
    p.add_argument("--input", required=True)
    p.add_argument("--response", required=True, help="response column name or zero-based index")
    p.add_argument("--rule", required=True, type=_rule_arg, help=f"one of {', '.join(RULE_KINDS)}")
    p.add_argument("--rw", type=float, default=100.0, help="weight cap R_w (default 100)")
    p.add_argument("--prelim", choices=("pre", "thpre"), default="pre")
    p.add_argument("--grid-size", type=_positive_int, default=20)
    p.add_argument("--stop-tol", type=float, default=1e-3)
    p.add_argument("--max-outer", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; the fit itself is deterministic")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reproduce", help="rerun a simulation table or figure", epilog=EPILOG)
    p.add_argument("target", choices=("table1", "table2", "figure1", "figure2"))
    p.add_argument("--reps", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--grid-size", type=_positive_int, default=20)
    p.add_argument("--full-scale", action="store_true",
                   help="use the (200, 400, 20) design for table2/figure2 instead of the halved desk design")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("curves", help="tabulate theta, psi and Psi for a rule", epilog=EPILOG)
    p.add_argument("--rule", required=True, type=_rule_arg)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--range", required=True, help="lo:hi:step")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("diagnostics", help="brute-force restricted eigenvalues of a small design", epilog=EPILOG)
    p.add_argument("--input", required=True)
    p.add_argument("--u", type=_positive_int, required=True)
    p.add_argument("--uprime", type=_positive_int, required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--response", help="drop this column before the analysis")
    p.add_argument("--raw", action="store_true", help="skip column normalization")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnostics)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"robsparse: error: {exc}", file=sys.stderr)
        return 1
    except (RobsparseError, ValueError, FloatingPointError) as exc:
        print(f"robsparse: fit failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
