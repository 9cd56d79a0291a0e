"""Command-line front end: calibrate, estimate, simulate, backtest.

Every run is reproducible: the seed comes from ``--seed`` (falling back to
the ``LOCPAR_SEED`` environment variable, then 0) and each output artifact
embeds the fully resolved configuration.  Floats are serialized with 17
significant digits, so reruns with identical flags produce byte-identical
files.

Exit codes: 0 success, 1 usage or validation error, 2 infeasible
calibration.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .calibration import (
    CalibrationConfig,
    CalibrationReport,
    SearchSettings,
    calibrate,
)
from .errors import InfeasibleError, LocparError, ParseError
from .families import FAMILIES, get_family
from .intervals import IntervalGrid, ladder_lengths
from .procedures import METHODS, AggregationKernel, run_method
from .backtest import backtest, load_prices, to_returns
from .simulate import bundled_scenarios, run_scenario, scenario_from_config

_FLOAT_FMT = ".17g"

_DEFAULT_THETA = {
    "gaussian": 0.0,
    "volatility": 1.0,
    "poisson": 1.0,
    "exponential": 1.0,
    "bernoulli": 0.5,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(message)


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("LOCPAR_SEED")
    return int(env) if env else 0


def _grid_from_flags(n0: int, ratio: float, k: int) -> IntervalGrid:
    lengths = ladder_lengths(n0, ratio, k)
    return IntervalGrid(
        right_edge=lengths[-1], lengths=tuple(lengths), ratio=ratio, n0=n0
    )


def _load_observations(path) -> np.ndarray:
    """One-column CSV of raw observations; a non-numeric first row is a header."""
    values = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(0, f"cannot open {path}: {exc}") from exc
    with fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if i == 1:
                    continue
                raise ParseError(i, f"value {row[0]!r} is not a number") from None
    if not values:
        raise ParseError(0, "no data rows found")
    return np.asarray(values, dtype=float)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _cmd_calibrate(args) -> int:
    family = get_family(args.family, **({"sigma": args.sigma} if args.family == "gaussian" else {}))
    theta_star = args.theta_star
    if theta_star is None:
        theta_star = _DEFAULT_THETA[args.family]
    grid = _grid_from_flags(args.n0, args.ratio, args.k)
    config = CalibrationConfig(
        family=family,
        theta_star=theta_star,
        grid=grid,
        r=args.r,
        alpha=args.alpha,
        m_reps=args.reps,
        search=SearchSettings(z_max=args.zmax, tol=args.tol),
        seed=_resolve_seed(args.seed),
        kernel=AggregationKernel(args.kernel_b),
    )
    report = calibrate(args.method, config)
    report.save(args.out)
    z_txt = " ".join(format(v, _FLOAT_FMT) for v in report.cv.z)
    print(f"calibrated {args.method} critical values: [{z_txt}]")
    print(f"report written to {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    report = CalibrationReport.load(args.cv)
    if report.method != args.method:
        raise LocparError(
            f"critical values were calibrated for {report.method!r}, "
            f"not {args.method!r}"
        )
    if report.config.family.name != args.family:
        raise LocparError(
            f"critical values belong to the {report.config.family.name} family, "
            f"not {args.family}"
        )
    data = _load_observations(args.data)
    t = args.t if args.t is not None else len(data)
    if not 1 <= t <= len(data):
        raise LocparError(f"right edge {t} outside series 1..{len(data)}")
    grid = report.config.grid.at(t)  # raises if the ladder does not fit at t
    family = report.config.family
    result = run_method(args.method, family, data, grid, report.cv, report.config.kernel)
    print(f"k_hat={result.k_hat}")
    print(f"theta_hat={result.theta_hat:{_FLOAT_FMT}}")
    if args.verbose:
        print("step,length,estimate,statistic,decision,gamma")
        from .procedures import step_estimates

        steps = step_estimates(family, data, grid)
        for k in range(1, grid.k_max + 1):
            stat = ""
            if k - 1 < result.statistics.size and not np.isnan(result.statistics[k - 1]):
                stat = format(float(result.statistics[k - 1]), _FLOAT_FMT)
            dec = ""
            if k - 1 < result.decisions.size:
                dec = str(bool(result.decisions[k - 1])).lower()
            gam = ""
            if result.gammas.size:
                gam = format(float(result.gammas[k - 1]), _FLOAT_FMT)
            est = format(float(steps.estimates[k - 1]), _FLOAT_FMT)
            print(f"{k},{grid.lengths[k - 1]},{est},{stat},{dec},{gam}")
    return 0


def _cmd_simulate(args) -> int:
    if (args.scenario is None) == (args.config is None):
        raise _UsageError("provide exactly one of --scenario or --config")
    if args.scenario is not None:
        catalog = bundled_scenarios()
        if args.scenario not in catalog:
            raise LocparError(
                f"unknown scenario {args.scenario!r}; "
                f"bundled ids: {', '.join(sorted(catalog))}"
            )
        scenario = catalog[args.scenario]
    else:
        with open(args.config) as fh:
            scenario = scenario_from_config(json.load(fh))
    if args.reps is not None:
        if args.reps < 1:
            raise _UsageError("--reps must be >= 1")
        scenario = replace(scenario, m_reps=args.reps)
    seed = _resolve_seed(args.seed)
    if args.seed is not None or os.environ.get("LOCPAR_SEED"):
        scenario = replace(scenario, seed=seed)

    grid = _grid_from_flags(args.n0, args.ratio, args.k)
    kernel = AggregationKernel(args.kernel_b)

    cvs = {}
    calib_echo = {}
    cv_paths = {"lms": args.cv_lms, "lcp": args.cv_lcp, "sa": args.cv_sa}
    for method in METHODS:
        if cv_paths[method]:
            rep = CalibrationReport.load(cv_paths[method])
            if rep.method != method:
                raise LocparError(
                    f"{cv_paths[method]} holds {rep.method!r} critical values"
                )
            cvs[method] = rep.cv
            calib_echo[method] = {"source": cv_paths[method]}
        else:
            theta_star = scenario.segments[0][1]
            config = CalibrationConfig(
                family=scenario.family,
                theta_star=theta_star,
                grid=grid,
                r=args.r,
                alpha=args.alpha,
                m_reps=args.calib_reps,
                seed=scenario.seed + 1,
                kernel=kernel,
            )
            rep = calibrate(method, config)
            cvs[method] = rep.cv
            calib_echo[method] = {
                "source": "internal",
                "theta_star": theta_star,
                "alpha": args.alpha,
                "r": args.r,
                "m_reps": args.calib_reps,
                "seed": config.seed,
                "z": [float(v) for v in rep.cv.z],
            }

    report = run_scenario(scenario, grid, cvs, kernel)
    config = dict(report.config)
    config["calibration"] = calib_echo
    report = replace(report, config=config)
    report.to_csv(args.out + ".csv")
    report.to_json(args.out + ".json")
    print(f"scenario report written to {args.out}.csv and {args.out}.json")
    return 0


def _cmd_backtest(args) -> int:
    report = CalibrationReport.load(args.cv)
    if report.config.family.name != "volatility":
        raise LocparError(
            "backtesting needs volatility-family critical values, got "
            f"{report.config.family.name}"
        )
    if report.method != args.method:
        raise LocparError(
            f"critical values were calibrated for {report.method!r}, "
            f"not {args.method!r}"
        )
    prices = load_prices(args.prices)
    returns = to_returns(prices, horizon=args.horizon)
    grid_cfg = report.config.grid
    result = backtest(
        returns,
        args.method,
        n0=grid_cfg.n0,
        ratio=grid_cfg.ratio,
        k_max=grid_cfg.k_max,
        cv=report.cv,
        kernel=report.config.kernel,
        stride=args.stride,
    )
    result.to_csv(args.out)
    sidecar = dict(result.config)
    sidecar["prices"] = str(args.prices)
    sidecar["cv_source"] = str(args.cv)
    sidecar["mean_kl_loss"] = result.mean_kl_loss
    with open(args.out + ".run.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"{len(result)} evaluation points written to {args.out}")
    if len(result):
        print(f"mean_kl_loss={result.mean_kl_loss:{_FLOAT_FMT}}")
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="locpar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_grid(p):
        p.add_argument("--n0", type=int, default=10, help="base window length")
        p.add_argument("--ratio", type=float, default=1.25, help="ladder ratio in (1, 3]")
        p.add_argument("--k", type=int, default=6, help="number of scales")

    cal = sub.add_parser("calibrate", help="Monte Carlo critical values")
    cal.add_argument("--family", required=True, choices=sorted(FAMILIES))
    cal.add_argument("--method", required=True, choices=list(METHODS))
    add_common_grid(cal)
    cal.add_argument("--sigma", type=float, default=1.0, help="gaussian sigma")
    cal.add_argument("--theta-star", type=float, default=None)
    cal.add_argument("--r", type=float, default=0.5, help="risk power")
    cal.add_argument("--alpha", type=float, default=0.25, help="test level")
    cal.add_argument("--reps", type=int, default=5000)
    cal.add_argument("--zmax", type=float, default=50.0)
    cal.add_argument("--tol", type=float, default=1e-3)
    cal.add_argument("--kernel-b", type=float, default=0.3)
    cal.add_argument("--seed", type=int, default=None)
    cal.add_argument("--threads", type=int, default=1)
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=_cmd_calibrate)

    est = sub.add_parser("estimate", help="adaptive estimate at one point")
    est.add_argument("--data", required=True, help="one-column CSV of observations")
    est.add_argument("--family", required=True, choices=sorted(FAMILIES))
    est.add_argument("--method", required=True, choices=list(METHODS))
    est.add_argument("--cv", required=True, help="calibration report JSON")
    est.add_argument("--t", type=int, default=None, help="right edge (default: end)")
    est.add_argument("--verbose", action="store_true", help="per-step statistics CSV")
    est.set_defaults(func=_cmd_estimate)

    sim = sub.add_parser("simulate", help="run a scenario study")
    sim.add_argument("--scenario", default=None, help="bundled scenario id")
    sim.add_argument("--config", default=None, help="scenario JSON file")
    sim.add_argument("--reps", type=int, default=None)
    add_common_grid(sim)
    sim.add_argument("--alpha", type=float, default=0.25)
    sim.add_argument("--r", type=float, default=0.5)
    sim.add_argument("--calib-reps", type=int, default=2000)
    sim.add_argument("--cv-lms", default=None)
    sim.add_argument("--cv-lcp", default=None)
    sim.add_argument("--cv-sa", default=None)
    sim.add_argument("--kernel-b", type=float, default=0.3)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", required=True, help="output prefix")
    sim.set_defaults(func=_cmd_simulate)

    bt = sub.add_parser("backtest", help="rolling volatility backtest")
    bt.add_argument("--prices", required=True, help="timestamp,price CSV")
    bt.add_argument("--method", required=True, choices=list(METHODS))
    bt.add_argument("--cv", required=True, help="volatility calibration report")
    bt.add_argument("--stride", type=int, default=1)
    bt.add_argument("--horizon", type=int, default=1)
    bt.add_argument("--out", required=True)
    bt.set_defaults(func=_cmd_backtest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if getattr(args, "threads", 1) < 1:
            raise _UsageError("--threads must be >= 1")
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except LocparError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
