"""Command-line surface.

Subcommands: simulate, fit, diagnose, compare, mc, build-covariates,
search.  Every command accepts --seed, --config (a JSON file whose keys
mirror the corresponding settings), --out (report path; stdout otherwise)
and --format (json or text).  Exit codes: 0 success, 1 usage or data error,
2 numerical failure.  All randomness flows from the explicit seed, so a
fixed seed reproduces reports byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data as datamod
from .exceptions import AcarError, DataError, NumericalError
from .fit import FitConfig, fit, quadratic_threshold
from .inference import compare_models, portmanteau_test
from .montecarlo import MCDesign, run_recovery_study, run_scenario_study
from .params import ParameterVector, benchmark_theta
from .search import enumerate_candidate_sets, search_models
from .simulate import DEFAULT_BURN_IN, SimConfig, simulate_covariates, simulate_path


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="report output path (default stdout)")
    parser.add_argument("--format", choices=("json", "text"), default="json")


def _add_fit_options(parser):
    parser.add_argument("--n-starts", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--eta0", type=float, default=None)
    parser.add_argument("--max-iterations", type=int, default=None)
    parser.add_argument("--gradient-tolerance", type=float, default=None)
    parser.add_argument("--k", type=int, default=None, help="category count (default: max observed level)")


def build_parser() -> _Parser:
    parser = _Parser(prog="acar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a path and its covariates")
    p.add_argument("--theta", default="table1:1", help="benchmark id (table1:N) or JSON file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--eta0", type=float, default=None)
    p.add_argument("--out-series", default=None, help="series CSV path")
    p.add_argument("--out-covariates", default=None, help="covariates CSV path")
    _add_common(p)

    p = sub.add_parser("fit", help="fit the model to a series/covariates pair")
    p.add_argument("--series", required=True)
    p.add_argument("--covariates", required=True)
    _add_fit_options(p)
    _add_common(p)

    p = sub.add_parser("diagnose", help="fit, then run the Portmanteau adequacy test")
    p.add_argument("--series", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--q", type=int, default=None, help="autocorrelation lags (default 1)")
    p.add_argument("--threshold", action="append", default=None, metavar="LIN,QUAD",
                   help="covariate column pair for a vertex threshold (repeatable)")
    _add_fit_options(p)
    _add_common(p)

    p = sub.add_parser("compare", help="fit two sites and test parameter equality")
    p.add_argument("--series1", required=True)
    p.add_argument("--covariates1", required=True)
    p.add_argument("--series2", required=True)
    p.add_argument("--covariates2", required=True)
    p.add_argument("--s-mode", choices=("assumed-zero", "empirical"), default=None)
    _add_fit_options(p)
    _add_common(p)

    p = sub.add_parser("mc", help="Monte Carlo studies (recovery or scenario)")
    p.add_argument("--design", choices=("recovery", "scenario"), required=True)
    p.add_argument("--theta", default="table1:1")
    p.add_argument("--n", type=int, default=None, help="sample size (scenario design)")
    p.add_argument("--sizes", default=None, help="comma list of sample sizes (recovery)")
    p.add_argument("--b", type=int, default=None, help="replications (default 100)")
    p.add_argument("--scenario", type=int, default=None, choices=(1, 2, 3, 4))
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_fit_options(p)
    _add_common(p)

    p = sub.add_parser("build-covariates", help="seasonal covariates from daily climate")
    p.add_argument("--climate", required=True)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--missing-threshold", type=float, default=None)
    p.add_argument("--out-table", default=None, help="covariate table CSV path")
    _add_common(p)

    p = sub.add_parser("search", help="covariate-set search with adequacy filtering")
    p.add_argument("--series", required=True)
    p.add_argument("--covariates", required=True, help="covariate table CSV")
    p.add_argument("--columns", default=None, help="comma list of base columns")
    p.add_argument("--quadratic", default=None, help="comma list of columns whose sq_ partner may enter")
    p.add_argument("--max-covariates", type=int, default=None)
    p.add_argument("--max-candidates", type=int, default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    _add_fit_options(p)
    _add_common(p)
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as handle:
            cfg = json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must contain a JSON object")
    return cfg


def _resolve(args, config, key, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _fit_config(args, config) -> FitConfig:
    return FitConfig(
        n_starts=int(_resolve(args, config, "n_starts", 20)),
        epsilon=float(_resolve(args, config, "epsilon", 1e-6)),
        max_iterations=int(_resolve(args, config, "max_iterations", 500)),
        gradient_tolerance=float(_resolve(args, config, "gradient_tolerance", 1e-6)),
        seed=int(_resolve(args, config, "seed", 0)),
        eta0=float(_resolve(args, config, "eta0", 0.5)),
    )


def _parse_theta(value: str, config) -> ParameterVector:
    if value.startswith("table1:"):
        return benchmark_theta(int(value.split(":", 1)[1]))
    if os.path.exists(value):
        with open(value) as handle:
            payload = json.load(handle)
        return ParameterVector(
            omega=payload["omega"],
            gamma=payload.get("gamma", []),
            alpha=payload["alpha"],
            beta=payload["beta"],
        )
    raise UsageError(
        f"--theta must be 'table1:N' or a JSON file with omega/gamma/alpha/beta; got {value!r}"
    )


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _render_text(payload, indent=0) -> str:
    lines = []
    pad = "  " * indent
    if isinstance(payload, dict):
        for key in sorted(payload):
            value = payload[key]
            if isinstance(value, (dict, list)):
                lines.append(f"{pad}{key}:")
                lines.append(_render_text(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {value!r}")
    elif isinstance(payload, list):
        lines.append(f"{pad}{payload!r}")
    else:
        lines.append(f"{pad}{payload!r}")
    return "\n".join(lines)


def _emit(report: dict, args) -> None:
    if args.format == "json":
        text = json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n"
    else:
        text = _render_text(report) + "\n"
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _load_pair(series_path, covariates_path, k):
    years, levels = datamod.read_series_csv(series_path)
    table = datamod.load_covariate_table(covariates_path)
    K = k if k is not None else (int(levels.max()) if levels.size else 1)
    return datamod.align_series_and_table(years, levels, table, K)


def _cmd_simulate(args, config) -> dict:
    theta = _parse_theta(_resolve(args, config, "theta", "table1:1"), config)
    if args.k is not None and args.k != theta.K:
        raise UsageError(f"--k {args.k} does not match theta with K={theta.K}")
    if args.p is not None and args.p != theta.P:
        raise UsageError(f"--p {args.p} does not match theta with P={theta.P}")
    seed = int(_resolve(args, config, "seed", 0))
    burn_in = int(_resolve(args, config, "burn_in", DEFAULT_BURN_IN))
    eta0 = float(_resolve(args, config, "eta0", 0.5))
    sim = SimConfig(theta=theta, n=args.n, P=theta.P, seed=seed, burn_in=burn_in, eta0=eta0)
    covariates = simulate_covariates(args.n, theta.P, np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed).spawn(3)[2])))
    series = simulate_path(sim, covariates)
    years = np.arange(1, args.n + 1)
    if args.out_series:
        datamod.write_series_csv(args.out_series, years, series.levels)
    if args.out_covariates:
        datamod.write_covariates_csv(args.out_covariates, years, covariates)
    counts = np.bincount(series.levels, minlength=theta.K + 1)
    return {
        "command": "simulate",
        "seed": seed,
        "n": args.n,
        "k": theta.K,
        "p": theta.P,
        "burn_in": burn_in,
        "eta0": eta0,
        "theta": theta.to_array().tolist(),
        "levels": series.levels.tolist(),
        "level_counts": counts.tolist(),
        "series_path": args.out_series,
        "covariates_path": args.out_covariates,
    }


def _cmd_fit(args, config) -> dict:
    series, matrix, years = _load_pair(args.series, args.covariates, args.k)
    result = fit(series, matrix, _fit_config(args, config))
    report = result.to_dict()
    report["command"] = "fit"
    report["years"] = [int(years[0]), int(years[-1])]
    report["columns"] = list(matrix.column_names)
    return report


def _cmd_diagnose(args, config) -> dict:
    series, matrix, years = _load_pair(args.series, args.covariates, args.k)
    result = fit(series, matrix, _fit_config(args, config))
    q = int(_resolve(args, config, "q", 1))
    diag = portmanteau_test(result, q)
    report = result.to_dict()
    report["command"] = "diagnose"
    report["years"] = [int(years[0]), int(years[-1])]
    report["columns"] = list(matrix.column_names)
    report["portmanteau"] = diag.to_dict()
    thresholds = {}
    for pair in args.threshold or []:
        lin_name, quad_name = (s.strip() for s in pair.split(","))
        names = list(matrix.column_names)
        lin_idx = result.K + names.index(lin_name)
        quad_idx = result.K + names.index(quad_name)
        thr = quadratic_threshold(result, lin_idx, quad_idx)
        scale = float(_resolve(args, config, "scale", 0.1))
        thresholds[f"{lin_name}|{quad_name}"] = {
            "estimate": thr.estimate,
            "std_error": thr.std_error,
            "ci_low": thr.ci_low,
            "ci_high": thr.ci_high,
            "scale": scale,
            "estimate_original_units": thr.estimate / scale,
            "ci_low_original_units": thr.ci_low / scale,
            "ci_high_original_units": thr.ci_high / scale,
        }
    report["thresholds"] = thresholds
    return report


def _cmd_compare(args, config) -> dict:
    series1, matrix1, _ = _load_pair(args.series1, args.covariates1, args.k)
    series2, matrix2, _ = _load_pair(args.series2, args.covariates2, args.k)
    base = _fit_config(args, config)
    seeds = np.random.SeedSequence(base.seed).generate_state(2)
    from dataclasses import replace

    fit1 = fit(series1, matrix1, replace(base, seed=int(seeds[0])))
    fit2 = fit(series2, matrix2, replace(base, seed=int(seeds[1])))
    s_mode = _resolve(args, config, "s_mode", "assumed-zero")
    comp = compare_models(fit1, fit2, s_mode)
    return {
        "command": "compare",
        "s_mode": s_mode,
        "fit1": fit1.to_dict(),
        "fit2": fit2.to_dict(),
        "comparison": comp.to_dict(),
    }


def _cmd_mc(args, config) -> dict:
    fit_config = _fit_config(args, config)
    seed = int(_resolve(args, config, "seed", 0))
    b = int(_resolve(args, config, "b", 100))
    burn_in = int(_resolve(args, config, "burn_in", DEFAULT_BURN_IN))
    workers = args.workers
    if args.design == "recovery":
        theta = _parse_theta(_resolve(args, config, "theta", "table1:1"), config)
        sizes_raw = _resolve(args, config, "sizes", None)
        if sizes_raw is None:
            if args.n is None:
                raise UsageError("recovery design needs --sizes or --n")
            sizes = (args.n,)
        elif isinstance(sizes_raw, str):
            sizes = tuple(int(s) for s in sizes_raw.split(","))
        else:
            sizes = tuple(int(s) for s in sizes_raw)
        design = MCDesign(
            theta0=theta,
            sample_sizes=sizes,
            replications=b,
            seed=seed,
            fit_config=fit_config,
            burn_in=burn_in,
        )
        summaries = run_recovery_study(design, workers=workers)
        return {
            "command": "mc",
            "design": "recovery",
            "seed": seed,
            "replications": b,
            "theta0": theta.to_array().tolist(),
            "summaries": {str(n): s.to_dict() for n, s in summaries.items()},
        }
    if args.scenario is None:
        raise UsageError("scenario design needs --scenario 1..4")
    if args.n is None:
        raise UsageError("scenario design needs --n")
    alpha = float(_resolve(args, config, "alpha", 0.05))
    report = run_scenario_study(
        args.scenario, args.n, b, fit_config, seed=seed, burn_in=burn_in,
        alpha=alpha, workers=workers,
    )
    payload = report.to_dict()
    payload["command"] = "mc"
    payload["design"] = "scenario"
    payload["seed"] = seed
    return payload


def _cmd_build_covariates(args, config) -> dict:
    daily = datamod.load_daily_climate(args.climate)
    table = datamod.build_seasonal_covariates(
        daily,
        scale=float(_resolve(args, config, "scale", datamod.DEFAULT_SCALE)),
        lag=int(_resolve(args, config, "lag", datamod.DEFAULT_LAG)),
        missing_threshold=float(
            _resolve(args, config, "missing_threshold", datamod.DEFAULT_MISSING_THRESHOLD)
        ),
    )
    if args.out_table:
        datamod.write_table_csv(args.out_table, table)
    return {
        "command": "build-covariates",
        "scale": table.scale,
        "lag": table.lag,
        "years": table.years.tolist(),
        "climate_years": table.climate_years.tolist(),
        "columns": list(table.column_names),
        "dropped_years": {str(y): reason for y, reason in sorted(table.dropped_years.items())},
        "table_path": args.out_table,
        "values": table.values.tolist(),
    }


def _cmd_search(args, config) -> dict:
    years, levels = datamod.read_series_csv(args.series)
    table = datamod.load_covariate_table(args.covariates)
    K = args.k if args.k is not None else (int(levels.max()) if levels.size else 1)
    series, _, kept_years = datamod.align_series_and_table(years, levels, table, K)
    table = table.restrict_to_years(kept_years)
    base_columns = [c for c in table.column_names if not c.startswith("sq_")]
    columns_raw = _resolve(args, config, "columns", None)
    columns = (
        [c.strip() for c in columns_raw.split(",")] if isinstance(columns_raw, str)
        else (columns_raw or base_columns)
    )
    quadratic_raw = _resolve(args, config, "quadratic", None)
    if quadratic_raw is None:
        quadratic = [c for c in columns if f"sq_{c}" in table.column_names]
    elif isinstance(quadratic_raw, str):
        quadratic = [c.strip() for c in quadratic_raw.split(",") if c.strip()]
    else:
        quadratic = list(quadratic_raw)
    candidates = enumerate_candidate_sets(
        columns,
        quadratic_for=quadratic,
        max_covariates=int(_resolve(args, config, "max_covariates", 8)),
        max_candidates=int(_resolve(args, config, "max_candidates", 512)),
    )
    report = search_models(
        series,
        table,
        candidates,
        q=int(_resolve(args, config, "q", 1)),
        alpha=float(_resolve(args, config, "alpha", 0.05)),
        fit_config=_fit_config(args, config),
    )
    payload = report.to_dict()
    payload["command"] = "search"
    payload["years"] = [int(kept_years[0]), int(kept_years[-1])]
    return payload


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "diagnose": _cmd_diagnose,
    "compare": _cmd_compare,
    "mc": _cmd_mc,
    "build-covariates": _cmd_build_covariates,
    "search": _cmd_search,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        report = _COMMANDS[args.command](args, config)
        _emit(report, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, AcarError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
