"""Command-line interface.

Every subcommand writes a table (CSV by default, JSON with ``--format json``)
to standard output or ``--out``. Numbers are printed with 9 significant
digits so that outputs are stable across runs and platforms.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import allocator, backtest, ged_dist as ged, utility_core
from .backtest import format_number

NORMAL_REFERENCE = 1.0 / math.sqrt(2.0 * math.pi)


class CliError(Exception):
    pass


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise CliError("grid bounds and step must be finite")
    if step <= 0:
        raise CliError("grid step must be positive")
    if hi < lo:
        raise CliError("grid maximum is below its minimum")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def _linspace(lo: float, hi: float, num: int) -> np.ndarray:
    if num < 1:
        raise CliError("number of points must be at least 1")
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise CliError("range must be finite with max >= min")
    return np.linspace(lo, hi, num)


def _kappa_grid(args) -> np.ndarray:
    if args.kappa is not None:
        return np.asarray(args.kappa, dtype=float)
    return _grid(args.kappa_min, args.kappa_max, args.kappa_step)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_number(v)
    return v


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        return float(format_number(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit_table(header: Sequence[str], rows, fmt: str, out) -> None:
    """Write rows as CSV, or as a JSON list of objects."""
    if fmt == "json":
        doc = [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]
        json.dump(doc, out, indent=1)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def emit_record(record: dict, fmt: str, out) -> None:
    if fmt == "json":
        json.dump({k: _json_value(v) for k, v in record.items()}, out, indent=1)
        out.write("\n")
    else:
        emit_table(list(record), [list(record.values())], fmt, out)


def cmd_tau(args, out) -> None:
    rows = [(k, allocator.tau(k)) for k in _kappa_grid(args)]
    emit_table(["kappa", "tau"], rows, args.format, out)


def cmd_utility_curve(args, out) -> None:
    wealth = _linspace(args.w_min, args.w_max, args.w_num)
    rows = []
    for beta in args.beta:
        u = utility_core.BudgetUtility(beta)
        rows.extend((beta, w, utility_core.utility(u, w)) for w in wealth)
    emit_table(["beta", "wealth", "utility"], rows, args.format, out)


def cmd_risk_scaling(args, out) -> None:
    rows = [(k, allocator.risk_cost_std(1.0, k), NORMAL_REFERENCE) for k in _kappa_grid(args)]
    emit_table(["kappa", "risk_cost_factor", "normal_reference"], rows, args.format, out)


def cmd_holding_curve(args, out) -> None:
    x = _linspace(args.x_min, args.x_max, args.x_num)
    curve = allocator.holding_curve(x, args.k)
    emit_table(["alpha_over_s", "relative_holding"], curve.tolist(), args.format, out)


def cmd_allocate(args, out) -> None:
    q = allocator.AllocationQuery(
        alpha=args.alpha, kappa=args.kappa, limit=args.limit,
        sigma=args.sigma, s=args.s, k_const=args.k,
    )
    emit_record(allocator.decide(q).as_dict(), args.format, out)


def cmd_eu(args, out) -> None:
    closed = allocator.expected_utility_closed(args.h, args.alpha, args.sigma, args.kappa)
    record = {"h": args.h, "closed_form": closed}
    p = ged.GedParams(args.alpha, args.sigma, args.kappa)
    if args.oracle:
        quad = utility_core.expected_utility_quadrature(args.h, p)
        record["quadrature"] = quad
        record["abs_diff"] = abs(closed - quad)
    if args.mc:
        est = utility_core.expected_utility_monte_carlo(args.h, p, args.mc, args.seed)
        record["monte_carlo"] = est.estimate
        record["mc_std_error"] = est.std_error
    emit_record(record, args.format, out)


def cmd_simulate(args, out) -> None:
    p = ged.GedParams(args.mu, args.sigma, args.kappa)
    series = backtest.simulate_series(p, args.n, args.seed, with_moments=args.with_moments)
    if args.format == "json":
        cols = ["timestamp", "return"] + (["alpha", "s"] if series.has_moments else [])
        data = [series.timestamps, series.returns]
        if series.has_moments:
            data += [series.alpha, series.s]
        emit_table(cols, list(zip(*data)), "json", out)
    else:
        backtest.write_series_csv(series, out)


def _strategy_config(args, k: float | None = None) -> backtest.StrategyConfig:
    return backtest.StrategyConfig(
        k_const=args.k if k is None else k,
        limit=args.limit,
        estimator_window=args.window,
        estimator_kind=args.estimator,
        warmup=args.warmup,
    )


def cmd_backtest(args, out) -> None:
    series = backtest.read_series_csv(args.input)
    report = backtest.run_strategy(series, _strategy_config(args))
    if args.format == "json":
        report.write_json(out)
    else:
        report.write_records(out)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            report.write_summary(fh)


def _k_grid(spec: str) -> list[float]:
    try:
        if ":" in spec:
            lo, hi, step = (float(x) for x in spec.split(":"))
            return _grid(lo, hi, step).tolist()
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad K grid {spec!r}; use 'lo:hi:step' or a comma list") from None


def cmd_calibrate(args, out) -> None:
    series = backtest.read_series_csv(args.input)
    cal = backtest.calibrate_k(series, _strategy_config(args, k=1.0), _k_grid(args.k_grid))
    if args.format == "json":
        cal.write_json(out)
    else:
        cal.write_csv(out)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            fh.write(f"best_k = {format_number(cal.best_k)}\n")


def _add_kappa_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=float, nargs="+", help="explicit kappa values")
    p.add_argument("--kappa-min", type=float, default=0.5)
    p.add_argument("--kappa-max", type=float, default=1.0)
    p.add_argument("--kappa-step", type=float, default=0.005)


def _add_strategy(p: argparse.ArgumentParser, with_k: bool = True) -> None:
    p.add_argument("input", help="CSV with header timestamp,return[,alpha,s]")
    if with_k:
        p.add_argument("--k", type=float, default=0.4, help="semi-empirical threshold K")
    p.add_argument("--limit", type=float, default=1.0, help="risk limit L")
    p.add_argument("--window", type=int, default=250, help="estimator window")
    p.add_argument("--estimator", choices=backtest.ESTIMATORS, default="rolling_mean_sd")
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--summary", help="write a key = value summary here")


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # flags are accepted before or after the subcommand; the subcommand
        # copy must not overwrite a value given up front
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--format", choices=("csv", "json"), default=d("csv"))
        g.add_argument("--out", default=d(None), help="output path (default: standard output)")
        g.add_argument("--seed", type=int, default=d(0))
        return g

    common = global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="budget-threshold",
        description="Risk-limited allocation under a budget-threshold utility.",
        parents=[global_flags(suppress=False)],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tau", parents=[common], help="tau(kappa) over a grid")
    _add_kappa_grid(p)
    p.set_defaults(func=cmd_tau)

    p = sub.add_parser("utility-curve", parents=[common], help="U(W, beta) curves")
    p.add_argument("--beta", type=float, nargs="+", default=[-1.0, 0.0, 1.0, 2.0])
    p.add_argument("--w-min", type=float, default=-3.0)
    p.add_argument("--w-max", type=float, default=3.0)
    p.add_argument("--w-num", type=int, default=121)
    p.set_defaults(func=cmd_utility_curve)

    p = sub.add_parser("risk-scaling", parents=[common], help="risk cost per unit std dev")
    _add_kappa_grid(p)
    p.set_defaults(func=cmd_risk_scaling)

    p = sub.add_parser("holding-curve", parents=[common], help="h/L against alpha/s")
    p.add_argument("--k", type=float, default=0.4)
    p.add_argument("--x-min", type=float, default=-1.0)
    p.add_argument("--x-max", type=float, default=1.0)
    p.add_argument("--x-num", type=int, default=401)
    p.set_defaults(func=cmd_holding_curve)

    p = sub.add_parser("allocate", parents=[common], help="optimal holding for one query")
    p.add_argument("--alpha", type=float, required=True)
    scale = p.add_mutually_exclusive_group(required=True)
    scale.add_argument("--sigma", type=float, help="GED scale")
    scale.add_argument("--s", type=float, help="standard deviation of returns")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--limit", type=float, required=True)
    p.add_argument("--k", type=float, help="use the semi-empirical rule with this K")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("eu", parents=[common], help="expected utility of a holding")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--oracle", action="store_true", help="also integrate numerically")
    p.add_argument("--mc", type=int, default=0, help="also estimate with this many draws")
    p.set_defaults(func=cmd_eu)

    p = sub.add_parser("simulate", parents=[common], help="i.i.d. GED return series")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--with-moments", action="store_true",
                   help="attach the true mean and std dev as alpha, s columns")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("backtest", parents=[common], help="run the three-state rule")
    _add_strategy(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("calibrate", parents=[common], help="sweep K by realized utility")
    _add_strategy(p, with_k=False)
    p.add_argument("--k-grid", default="0.05:1.0:0.05", help="'lo:hi:step' or comma list")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with contextlib.ExitStack() as stack:
            if args.out:
                out = stack.enter_context(open(args.out, "w", newline=""))
            else:
                out = sys.stdout
            args.func(args, out)
    except (CliError, ged.ParameterError, ged.QuadratureError, backtest.SeriesFormatError,
            backtest.InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
