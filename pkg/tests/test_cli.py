import json

import numpy as np
import pandas as pd
import pytest

from acar.cli import main
from test_data import daily_frame


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def run_json(args, capsys):
    code, out = run_cli(args + ["--format", "json"], capsys)
    assert code == 0, out
    return json.loads(out)


@pytest.fixture
def sim_files(tmp_path, capsys):
    series = tmp_path / "y.csv"
    cov = tmp_path / "x.csv"
    code, _ = run_cli(
        ["simulate", "--theta", "table1:1", "--n", "120", "--seed", "7",
         "--out-series", str(series), "--out-covariates", str(cov)],
        capsys,
    )
    assert code == 0
    return series, cov


class TestSimulateCommand:
    def test_report_and_files(self, tmp_path, capsys):
        series = tmp_path / "y.csv"
        cov = tmp_path / "x.csv"
        report = run_json(
            ["simulate", "--k", "3", "--p", "5", "--n", "60", "--theta", "table1:1",
             "--seed", "7", "--out-series", str(series), "--out-covariates", str(cov)],
            capsys,
        )
        assert report["command"] == "simulate"
        assert report["n"] == 60 and report["k"] == 3 and report["p"] == 5
        assert sum(report["level_counts"]) == 60
        y = pd.read_csv(series)
        x = pd.read_csv(cov)
        assert list(y.columns) == ["year", "level"]
        assert x.shape == (60, 6)

    def test_reproducible_csv(self, tmp_path, capsys):
        paths = []
        for tag in ("a", "b"):
            series = tmp_path / f"y_{tag}.csv"
            code, _ = run_cli(
                ["simulate", "--n", "50", "--seed", "21", "--out-series", str(series)],
                capsys,
            )
            assert code == 0
            paths.append(series)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_theta_k_mismatch_is_usage_error(self, capsys):
        code, _ = run_cli(["simulate", "--n", "50", "--k", "2"], capsys)
        assert code == 1


class TestFitCommand:
    def test_aic_recomputes_from_negloglik(self, sim_files, capsys):
        series, cov = sim_files
        report = run_json(
            ["fit", "--series", str(series), "--covariates", str(cov),
             "--seed", "3", "--n-starts", "5"],
            capsys,
        )
        assert report["command"] == "fit"
        d = 3 * report["K"] + report["P"]
        assert report["aic"] == pytest.approx(2 * d + 2 * report["negloglik"], abs=1e-10)
        assert len(report["theta_hat"]) == d
        for key in ("covariance", "std_errors", "t_stats", "residuals", "J_hat",
                    "L_hat", "converged", "at_bound", "negloglik", "aic"):
            assert key in report

    def test_missing_file_is_usage_error(self, capsys, tmp_path):
        code, _ = run_cli(
            ["fit", "--series", str(tmp_path / "nope.csv"),
             "--covariates", str(tmp_path / "nope2.csv")],
            capsys,
        )
        assert code == 1


class TestDiagnoseCommand:
    def test_portmanteau_fields(self, sim_files, capsys):
        series, cov = sim_files
        report = run_json(
            ["diagnose", "--series", str(series), "--covariates", str(cov),
             "--seed", "3", "--n-starts", "5", "--q", "2"],
            capsys,
        )
        pm = report["portmanteau"]
        assert pm["df"] == 6
        assert pm["statistic"] >= 0
        assert 0 <= pm["p_value"] <= 1

    def test_threshold_report(self, sim_files, capsys):
        series, cov = sim_files
        report = run_json(
            ["diagnose", "--series", str(series), "--covariates", str(cov),
             "--seed", "3", "--n-starts", "4", "--q", "1",
             "--threshold", "x1,x2"],
            capsys,
        )
        thr = report["thresholds"]["x1|x2"]
        lin, quad = report["theta_hat"][3], report["theta_hat"][4]
        assert thr["estimate"] == pytest.approx(-lin / (2 * quad))
        assert thr["estimate_original_units"] == pytest.approx(thr["estimate"] / thr["scale"])

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # constant series leaves the information matrix singular
        series = tmp_path / "y.csv"
        cov = tmp_path / "x.csv"
        pd.DataFrame({"year": range(1900, 1960), "level": 0}).to_csv(series, index=False)
        rng = np.random.default_rng(0)
        frame = pd.DataFrame(rng.standard_normal((60, 2)), columns=["a", "b"])
        frame.insert(0, "year", range(1900, 1960))
        frame.to_csv(cov, index=False)
        code, _ = run_cli(
            ["diagnose", "--series", str(series), "--covariates", str(cov),
             "--k", "3", "--n-starts", "2"],
            capsys,
        )
        assert code == 2


class TestCompareCommand:
    def test_compare_two_simulated_sites(self, tmp_path, capsys):
        files = {}
        for tag, theta, seed in (("1", "table1:1", 5), ("2", "table1:3", 6)):
            series = tmp_path / f"y{tag}.csv"
            cov = tmp_path / f"x{tag}.csv"
            code, _ = run_cli(
                ["simulate", "--theta", theta, "--n", "150", "--seed", str(seed),
                 "--out-series", str(series), "--out-covariates", str(cov)],
                capsys,
            )
            assert code == 0
            files[tag] = (series, cov)
        report = run_json(
            ["compare", "--series1", str(files["1"][0]), "--covariates1", str(files["1"][1]),
             "--series2", str(files["2"][0]), "--covariates2", str(files["2"][1]),
             "--seed", "9", "--n-starts", "4"],
            capsys,
        )
        comp = report["comparison"]
        assert comp["global_df"] == 14
        assert len(comp["per_param_z"]) == 14
        assert comp["S_mode"] == "assumed-zero"


class TestMcCommand:
    def test_recovery_matches_api(self, capsys):
        report = run_json(
            ["mc", "--design", "recovery", "--theta", "table1:1", "--sizes", "100",
             "--b", "2", "--seed", "11", "--n-starts", "3"],
            capsys,
        )
        from acar.fit import FitConfig
        from acar.montecarlo import MCDesign, run_recovery_study
        import acar

        design = MCDesign(
            theta0=acar.benchmark_theta(1), sample_sizes=(100,), replications=2,
            seed=11, fit_config=FitConfig(n_starts=3, seed=11),
        )
        summary = run_recovery_study(design)[100]
        np.testing.assert_allclose(
            report["summaries"]["100"]["cmle"], summary.cmle, rtol=1e-12
        )

    def test_scenario_design(self, capsys):
        report = run_json(
            ["mc", "--design", "scenario", "--scenario", "2", "--n", "100",
             "--b", "2", "--seed", "4", "--n-starts", "3"],
            capsys,
        )
        assert report["design"] == "scenario"
        assert report["replications"] == 2
        assert "rejection_rate" in report and "joint_acceptance_rate" in report

    def test_scenario_needs_flags(self, capsys):
        code, _ = run_cli(["mc", "--design", "scenario", "--b", "2"], capsys)
        assert code == 1


class TestBuildCovariatesCommand:
    def test_build_and_search(self, tmp_path, capsys):
        climate = tmp_path / "climate.csv"
        daily_frame(range(1940, 1952)).to_csv(climate, index=False)
        table_path = tmp_path / "table.csv"
        report = run_json(
            ["build-covariates", "--climate", str(climate), "--scale", "0.1",
             "--lag", "2", "--out-table", str(table_path)],
            capsys,
        )
        assert report["command"] == "build-covariates"
        assert report["scale"] == 0.1
        assert len(report["columns"]) == 20
        assert table_path.exists()

        years = report["years"]
        series = tmp_path / "y.csv"
        rng = np.random.default_rng(1)
        pd.DataFrame({"year": years, "level": rng.integers(0, 4, len(years))}).to_csv(
            series, index=False
        )
        search_report = run_json(
            ["search", "--series", str(series), "--covariates", str(table_path),
             "--columns", "range_tmax_spring,log_prcp", "--quadratic", "",
             "--q", "1", "--n-starts", "2", "--seed", "3", "--k", "3"],
            capsys,
        )
        assert search_report["command"] == "search"
        assert len(search_report["candidates"]) == 3


class TestDeterminism:
    def test_reports_byte_identical(self, tmp_path, sim_files, capsys):
        series, cov = sim_files
        outs = []
        for tag in ("a", "b"):
            out_path = tmp_path / f"fit_{tag}.json"
            code, _ = run_cli(
                ["fit", "--series", str(series), "--covariates", str(cov),
                 "--seed", "3", "--n-starts", "4", "--out", str(out_path)],
                capsys,
            )
            assert code == 0
            outs.append(out_path.read_bytes())
        assert outs[0] == outs[1]

    def test_config_file_supplies_defaults(self, tmp_path, sim_files, capsys):
        series, cov = sim_files
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_starts": 4, "seed": 3}))
        a = run_json(["fit", "--series", str(series), "--covariates", str(cov),
                      "--config", str(cfg)], capsys)
        b = run_json(["fit", "--series", str(series), "--covariates", str(cov),
                      "--seed", "3", "--n-starts", "4"], capsys)
        assert a["theta_hat"] == b["theta_hat"]

    def test_text_format(self, sim_files, capsys):
        series, cov = sim_files
        code, out = run_cli(
            ["fit", "--series", str(series), "--covariates", str(cov),
             "--seed", "3", "--n-starts", "2", "--format", "text"],
            capsys,
        )
        assert code == 0
        assert "negloglik:" in out
