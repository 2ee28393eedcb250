import numpy as np
import pytest

import acar
from acar.fit import FitConfig
from acar.montecarlo import (
    SCENARIOS,
    MCDesign,
    run_recovery_study,
    run_scenario_study,
)
from acar.simulate import Coupling


def light_config(seed=0):
    return FitConfig(n_starts=3, seed=seed)


class TestScenarioTable:
    def test_mapping_matches_protocol(self):
        assert SCENARIOS[1] == (Coupling.INDEPENDENT, 1, 1, "assumed-zero")
        assert SCENARIOS[2] == (Coupling.INDEPENDENT, 1, 3, "assumed-zero")
        assert SCENARIOS[3] == (Coupling.ANTITHETIC, 1, 1, "empirical")
        assert SCENARIOS[4] == (Coupling.COMMON, 1, 3, "empirical")


class TestRecoveryStudy:
    def test_single_replication_identities(self, theta1):
        design = MCDesign(
            theta0=theta1, sample_sizes=(120,), replications=1, seed=11,
            fit_config=light_config(),
        )
        out = run_recovery_study(design)[120]
        assert out.n_used + out.n_failed + out.n_at_bound == 1
        if out.n_used == 1:
            np.testing.assert_array_equal(out.cmle, out.estimates[0])
            err = out.estimates[0] - theta1.to_array()
            np.testing.assert_allclose(out.mse, err**2, rtol=1e-14)
            np.testing.assert_allclose(out.mae, np.abs(err), rtol=1e-14)
            np.testing.assert_allclose(out.mse, out.mae**2, rtol=1e-12)

    def test_determinism(self, theta1):
        design = MCDesign(
            theta0=theta1, sample_sizes=(100,), replications=3, seed=17,
            fit_config=light_config(),
        )
        a = run_recovery_study(design)[100]
        b = run_recovery_study(design)[100]
        np.testing.assert_array_equal(a.estimates, b.estimates)
        np.testing.assert_array_equal(a.std_errors, b.std_errors)

    def test_replications_vary(self, theta1):
        design = MCDesign(
            theta0=theta1, sample_sizes=(100,), replications=3, seed=17,
            fit_config=light_config(),
        )
        out = run_recovery_study(design)[100]
        assert out.n_used >= 2
        assert np.ptp(out.estimates, axis=0).max() > 0

    def test_sample_size_floor(self, theta1):
        with pytest.raises(ValueError):
            MCDesign(theta0=theta1, sample_sizes=(10,), replications=2, seed=0)

    def test_worker_pool_matches_serial(self, theta1):
        design = MCDesign(
            theta0=theta1, sample_sizes=(100,), replications=2, seed=29,
            fit_config=light_config(),
        )
        serial = run_recovery_study(design, workers=1)[100]
        pooled = run_recovery_study(design, workers=2)[100]
        np.testing.assert_array_equal(serial.estimates, pooled.estimates)
        np.testing.assert_array_equal(serial.std_errors, pooled.std_errors)

    def test_summary_dict_schema(self, theta1):
        design = MCDesign(
            theta0=theta1, sample_sizes=(100,), replications=2, seed=23,
            fit_config=light_config(),
        )
        payload = run_recovery_study(design)[100].to_dict()
        for key in ("n", "replications", "n_used", "n_failed", "n_at_bound",
                    "theta0", "cmle", "tse", "mae", "mse"):
            assert key in payload


class TestScenarioStudy:
    def test_invalid_scenario(self):
        with pytest.raises(ValueError):
            run_scenario_study(5, 100, 2, light_config())

    def test_determinism_and_counts(self):
        a = run_scenario_study(1, 100, 3, light_config(), seed=5)
        b = run_scenario_study(1, 100, 3, light_config(), seed=5)
        assert a.n_used + a.n_failed == 3
        np.testing.assert_array_equal(a.statistics, b.statistics)
        assert a.rejection_rate == b.rejection_rate
        assert a.joint_acceptance_rate == b.joint_acceptance_rate

    def test_power_scenario_rejects_at_small_scale(self):
        out = run_scenario_study(2, 300, 4, light_config(), seed=9)
        assert out.n_used == 4
        assert out.rejection_rate == 1.0
        assert out.statistics.min() > 100.0

    def test_report_dict_schema(self):
        payload = run_scenario_study(1, 100, 2, light_config(), seed=3).to_dict()
        for key in ("scenario", "n", "replications", "alpha", "n_used", "n_failed",
                    "rejection_rate", "acceptance_rate", "joint_acceptance_rate",
                    "mean_statistic"):
            assert key in payload
