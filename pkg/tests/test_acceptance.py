"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; the statistical studies take a few minutes each at desk scale.
"""

import json

import numpy as np
import pandas as pd
import pytest

import acar
from acar.cli import main as cli_main
from acar.core import ModelData, probabilities_from_eta, score_path
from acar.data import SeasonalCovariateTable, build_seasonal_covariates
from acar.fit import FitConfig, vertex_threshold
from acar.inference import portmanteau_test
from acar.montecarlo import MCDesign, run_recovery_study, run_scenario_study
from acar.search import search_models
from acar.simulate import SimConfig, simulate_covariates, simulate_path

SEED_RECOVERY = 908
SEED_PORTMANTEAU = 906
SEED_SCENARIOS = {1: 9071, 2: 9072, 3: 9073, 4: 9074}

Z95 = 1.959963984540054


def report(criterion: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"[ACCEPTANCE {criterion:>2}] {name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def recovery_study():
    design = MCDesign(
        theta0=acar.benchmark_theta(1),
        sample_sizes=(100, 500),
        replications=100,
        seed=SEED_RECOVERY,
        fit_config=FitConfig(),
    )
    return run_recovery_study(design)


@pytest.fixture(scope="module")
def portmanteau_study():
    theta = acar.benchmark_theta(1)
    rejections, stats = [], []
    for rs in np.random.SeedSequence(SEED_PORTMANTEAU).spawn(200):
        seeds = rs.generate_state(3)
        X = simulate_covariates(500, 5, int(seeds[0]))
        y = simulate_path(SimConfig(theta=theta, n=500, P=5, seed=int(seeds[1])), X)
        result = acar.fit(y, X, FitConfig(seed=int(seeds[2])))
        out = portmanteau_test(result, 3)
        rejections.append(out.p_value < 0.05)
        stats.append(out.statistic)
    return np.array(rejections), np.array(stats)


@pytest.fixture(scope="module")
def scenario_reports():
    return {
        sc: run_scenario_study(sc, 500, 200, FitConfig(), seed=SEED_SCENARIOS[sc])
        for sc in (1, 2, 3, 4)
    }


def test_c01_gradient_correctness():
    rng = np.random.default_rng(101)
    theta0 = acar.benchmark_theta(1)
    X = simulate_covariates(200, 5, 41)
    y = simulate_path(SimConfig(theta=theta0, n=200, P=5, seed=43), X)
    data = ModelData(y, X)
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        vec = np.concatenate(
            [rng.uniform(-2, 2, 11), rng.uniform(-0.9, 0.9, 3)]
        )
        theta = acar.ParameterVector.from_array(vec, 3, 5)
        path = data.full_path(vec)
        analytic = score_path(theta, y, X, path).sum(axis=0)
        fd = np.zeros(14)
        for i in range(14):
            vp, vm = vec.copy(), vec.copy()
            vp[i] += h
            vm[i] -= h
            fd[i] = (
                acar.negative_log_likelihood(acar.ParameterVector.from_array(vp, 3, 5), y, X)
                - acar.negative_log_likelihood(acar.ParameterVector.from_array(vm, 3, 5), y, X)
            ) / (2 * h)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd)))))
    ok = worst <= 1e-5
    report(1, "analytic score vs central finite differences", ok, f"max rel err {worst:.2e}")
    assert ok


def test_c02_probability_invariants():
    rng = np.random.default_rng(202)
    eta = rng.uniform(-30.0, 30.0, size=(100_000, 3))
    pi = probabilities_from_eta(eta)
    sum_err = float(np.abs(pi.sum(axis=1) - 1.0).max())
    inv_err = float(np.abs(np.log(pi[:, 1:] / pi[:, :-1]) - eta).max())
    ok = sum_err <= 1e-12 and inv_err <= 1e-10 and bool((pi > 0).all() and (pi < 1).all())
    report(2, "probability sum and adjacent-ratio inverse identity", ok,
           f"sum err {sum_err:.2e}, inverse err {inv_err:.2e}")
    assert ok


def test_c03_likelihood_enumeration_oracle():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(1000):
        K = int(rng.integers(1, 3))
        P = int(rng.integers(0, 3))
        n = int(rng.integers(2, 6))
        theta = acar.ParameterVector(
            omega=rng.uniform(-1.5, 1.5, K),
            gamma=rng.uniform(-1.5, 1.5, P),
            alpha=rng.uniform(-1.5, 1.5, K),
            beta=rng.uniform(-0.9, 0.9, K),
        )
        series = acar.OrdinalSeries(levels=rng.integers(0, K + 1, n), K=K)
        cov = acar.CovariateMatrix(values=rng.standard_normal((n, P)))
        onehot = series.one_hot()
        eta = [0.5] * K
        brute = 0.0
        for t in range(1, n):
            eta = [
                theta.omega[k]
                + float(cov.values[t - 1] @ theta.gamma)
                + float(onehot[t - 1] @ theta.alpha)
                + theta.beta[k] * eta[k]
                for k in range(K)
            ]
            weights = np.concatenate([[1.0], np.exp(np.cumsum(eta))])
            brute += -np.log(weights[series.levels[t]] / weights.sum())
        vectorized = acar.negative_log_likelihood(theta, series, cov)
        worst = max(worst, abs(vectorized - brute) / max(1.0, abs(brute)))
    ok = worst <= 1e-12
    report(3, "vectorized likelihood vs per-step enumeration", ok, f"max err {worst:.2e}")
    assert ok


def test_c04_estimator_recovery(recovery_study):
    theta0 = acar.benchmark_theta(1).to_array()
    s500 = recovery_study[500]
    s100 = recovery_study[100]
    bias = np.abs(s500.cmle - theta0)
    linear_ok = bool((bias[:11] <= 0.15).all())
    beta_ok = bool((bias[11:] <= 0.05).all())
    mse_beta1_ok = bool(s500.mse[11] <= 0.03)
    monotone_ok = bool((s500.mse < s100.mse).all())
    tse_ok = bool((s500.tse < s100.tse).all())
    ok = linear_ok and beta_ok and mse_beta1_ok and monotone_ok and tse_ok
    report(4, "recovery bias/MSE at n=500 and MSE decrease from n=100", ok,
           f"max|bias| lin {bias[:11].max():.3f} beta {bias[11:].max():.3f}, "
           f"MSE(beta1) {s500.mse[11]:.4f}, MSE monotone {monotone_ok}, "
           f"TSE monotone {tse_ok}, used {s500.n_used}/{s500.replications}")
    assert ok


def test_c05_wald_coverage(recovery_study):
    s500 = recovery_study[500]
    z = (s500.estimates - s500.theta0) / s500.std_errors
    coverage = (np.abs(z) <= Z95).mean(axis=0)
    ok = bool((coverage >= 0.85).all())
    report(5, "95% Wald intervals cover every true component in >= 85%", ok,
           f"min coverage {coverage.min():.3f}")
    assert ok


def test_c06_portmanteau_size(portmanteau_study):
    rejections, stats = portmanteau_study
    rate = float(rejections.mean())
    mean_stat = float(stats.mean())
    ok = 0.01 <= rate <= 0.15 and abs(mean_stat - 9.0) <= 0.2 * 9.0
    report(6, "Portmanteau size at n=500, q=3", ok,
           f"rejection {rate:.3f}, mean statistic {mean_stat:.2f} (target 9)")
    assert ok


def test_c07_comparison_power_and_size(scenario_reports):
    r = scenario_reports
    power_ok = r[2].rejection_rate >= 0.95 and r[4].rejection_rate >= 0.95
    # size scenarios gate on the family-wise acceptance (no per-parameter
    # test rejects); the global-test rate is reported alongside
    s1, s3 = r[1].joint_acceptance_rate, r[3].joint_acceptance_rate
    size_ok = abs(s1 - 0.65) <= 0.15 and abs(s3 - 0.60) <= 0.15
    ok = bool(power_ok and size_ok)
    report(7, "comparison-test power and size over the four scenarios", ok,
           f"global rejection s2 {r[2].rejection_rate:.3f} s4 {r[4].rejection_rate:.3f}; "
           f"family acceptance s1 {s1:.3f} s3 {s3:.3f} "
           f"(global acceptance s1 {r[1].acceptance_rate:.3f} s3 {r[3].acceptance_rate:.3f})")
    assert ok


def test_c08_threshold_arithmetic():
    cases = [
        ((-58.714, 12.927), 2.2710, 22.7),
        ((-67.179, 15.404), 2.1806, 21.8),
        ((31.206, -4.794), 3.2546, 32.5),
    ]
    ok = True
    details = []
    for (lin, quad), vertex, degrees in cases:
        out = vertex_threshold([lin, quad], np.eye(2), 0, 1, truncate_at_zero=False)
        ok &= abs(out.estimate - vertex) <= 1e-3
        ok &= abs(10.0 * out.estimate - degrees) <= 0.05
        symmetric = abs((out.ci_high - out.estimate) - (out.estimate - out.ci_low)) <= 1e-10
        ok &= symmetric
        details.append(f"{out.estimate:.4f}")
    report(8, "quadratic-vertex thresholds from published coefficient pairs",
           bool(ok), "vertices " + ", ".join(details))
    assert ok


def test_c09_synthetic_pipeline_golden(tmp_path):
    # covariate construction on a hand-computed fixture
    rows = []
    for year in (1900, 1901, 1902):
        for month, tmax in ((4, 20.0), (5, 20.0), (6, 20.0), (7, 25.0), (8, 26.0), (9, 27.0)):
            rows.append({
                "date": f"{year}-{month:02d}-15",
                "tmax": tmax + (year - 1900),
                "tmin": tmax - 10.0,
                "prcp": 100.0,
                "snow": 50.0,
            })
    table = build_seasonal_covariates(pd.DataFrame(rows), scale=0.1, lag=2)
    golden = {
        "range_tmax_spring": [0.0, 0.0],
        "range_tmax_summer": [0.2, 0.2],
        "diff_mean_tmax_spring": [0.1, 0.1],
        "log_prcp": [np.log(600.0)] * 2,
        "diff_log_prcp": [0.0, 0.0],
        "sq_range_tmax_summer": [0.04, 0.04],
    }
    covariates_ok = True
    for name, want in golden.items():
        covariates_ok &= bool(np.allclose(table.column(name), want, atol=1e-10))
    covariates_ok &= list(table.years) == [1902, 1903]

    # covariate-set search recovers the generating subset in most seeded runs
    gen_theta = acar.ParameterVector(
        omega=[0.5, 0.3, -0.2], gamma=[1.2, -1.2], alpha=[0.3, -0.2, 0.2],
        beta=[0.4, -0.2, 0.1],
    )
    hits = 0
    runs = 20
    candidates = [("a", "b"), ("a",), ("b",), ("a", "b", "c")]
    for run, rs in enumerate(np.random.SeedSequence(909).spawn(runs)):
        seeds = rs.generate_state(3)
        rng = np.random.default_rng(int(seeds[0]))
        values = rng.standard_normal((300, 3))
        search_table = SeasonalCovariateTable(
            years=np.arange(1900, 2200),
            climate_years=np.arange(1900, 2200) - 1,
            values=values,
            column_names=("a", "b", "c"),
            scale=1.0,
            lag=2,
        )
        matrix = search_table.subset(("a", "b")).matrix_for_years(search_table.years)
        series = simulate_path(
            SimConfig(theta=gen_theta, n=300, P=2, seed=int(seeds[1]), burn_in=100),
            matrix,
        )
        out = search_models(series, search_table, candidates, q=1,
                            fit_config=FitConfig(seed=int(seeds[2])))
        if out.selected is not None and out.selected.columns == ("a", "b"):
            hits += 1
    search_ok = hits > runs / 2
    ok = bool(covariates_ok and search_ok)
    report(9, "synthetic-fixture golden files for the data pipeline", ok,
           f"covariate table exact: {bool(covariates_ok)}; "
           f"generating subset selected {hits}/{runs}")
    assert ok


def test_c10_cli_determinism(tmp_path):
    series = tmp_path / "y.csv"
    cov = tmp_path / "x.csv"
    climate = tmp_path / "climate.csv"
    table = tmp_path / "table.csv"

    rows = []
    for year in range(1940, 1952):
        for day in pd.date_range(f"{year}-01-01", f"{year}-12-31", freq="D"):
            base = 10.0 + 10.0 * np.sin(2 * np.pi * day.dayofyear / 365.0) + year % 5
            rows.append({
                "date": day.date().isoformat(),
                "tmax": base,
                "tmin": base - 7.0,
                "prcp": 2.0 + day.dayofyear % 3,
                "snow": 1.0 if day.month in (1, 2, 12) else 0.0,
            })
    pd.DataFrame(rows).to_csv(climate, index=False)

    assert cli_main([
        "simulate", "--n", "60", "--seed", "7",
        "--out-series", str(series), "--out-covariates", str(cov),
    ]) == 0
    assert cli_main([
        "build-covariates", "--climate", str(climate), "--out-table", str(table),
        "--out", str(tmp_path / "ignore.json"),
    ]) == 0

    y2 = tmp_path / "y2.csv"
    x2 = tmp_path / "x2.csv"
    assert cli_main([
        "simulate", "--theta", "table1:3", "--n", "60", "--seed", "8",
        "--out-series", str(y2), "--out-covariates", str(x2),
    ]) == 0

    table_years = pd.read_csv(table)["year"]
    search_series = tmp_path / "ys.csv"
    pd.DataFrame({
        "year": table_years,
        "level": np.arange(len(table_years)) % 4,
    }).to_csv(search_series, index=False)

    commands = {
        "simulate": ["simulate", "--n", "40", "--seed", "5"],
        "fit": ["fit", "--series", str(series), "--covariates", str(cov),
                "--seed", "3", "--n-starts", "4"],
        "diagnose": ["diagnose", "--series", str(series), "--covariates", str(cov),
                     "--seed", "3", "--n-starts", "4", "--q", "1"],
        "compare": ["compare", "--series1", str(series), "--covariates1", str(cov),
                    "--series2", str(y2), "--covariates2", str(x2),
                    "--seed", "9", "--n-starts", "3"],
        "mc": ["mc", "--design", "recovery", "--sizes", "100", "--b", "2",
               "--seed", "11", "--n-starts", "3"],
        "build-covariates": ["build-covariates", "--climate", str(climate)],
        "search": ["search", "--series", str(search_series), "--covariates", str(table),
                   "--columns", "range_tmax_spring,log_prcp", "--quadratic", "",
                   "--n-starts", "2", "--seed", "3", "--k", "3"],
    }
    ok = True
    for name, args in commands.items():
        blobs = []
        for tag in ("a", "b"):
            out_path = tmp_path / f"{name}_{tag}.json"
            code = cli_main(args + ["--out", str(out_path)])
            assert code == 0, f"{name} exited {code}"
            blobs.append(out_path.read_bytes())
        same = blobs[0] == blobs[1]
        ok &= same
        json.loads(blobs[0])  # valid JSON
    report(10, "CLI reports byte-identical under a fixed seed", bool(ok),
           f"{len(commands)} commands checked")
    assert ok
