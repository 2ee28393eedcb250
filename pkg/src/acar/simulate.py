"""Exact simulation of the data-generating process, with paired-site coupling.

Randomness flows from counter-based Philox streams derived from explicit
seeds; every configuration draws its covariate stream and its uniform
stream from separate child sequences, so paired-site coupling of the
uniforms never perturbs the covariates.  Identical (seed, config, coupling)
inputs reproduce outputs bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import probabilities_from_eta
from .exceptions import DataError
from .params import (
    DEFAULT_ETA0,
    CovariateMatrix,
    OrdinalSeries,
    ParameterVector,
    validate_parameters,
)

DEFAULT_BURN_IN = 200


class Coupling(Enum):
    """How the two uniform innovation streams of a site pair are tied."""

    INDEPENDENT = "independent"
    COMMON = "common"
    ANTITHETIC = "antithetic"


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to simulate one path."""

    theta: ParameterVector
    n: int
    P: int
    seed: int
    burn_in: int = DEFAULT_BURN_IN
    eta0: float = DEFAULT_ETA0

    def __post_init__(self):
        validate_parameters(self.theta)
        if self.n < 2:
            raise DataError(f"sample size must be at least 2, got {self.n}")
        if self.P != self.theta.P:
            raise DataError(
                f"config P={self.P} does not match theta with P={self.theta.P}"
            )
        if self.burn_in < 0:
            raise DataError("burn_in must be non-negative")


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _rng(rng_or_seed) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(rng_or_seed))))


def simulate_covariates(n: int, P: int, rng) -> CovariateMatrix:
    """Draw an (n, P) matrix of i.i.d. standard normal covariates.

    ``rng`` may be a Generator or an integer seed; the same seed always
    yields the same matrix.
    """
    if n < 1:
        raise DataError(f"covariate simulation needs n >= 1, got {n}")
    if P < 0:
        raise DataError("P must be non-negative")
    values = _rng(rng).standard_normal((n, P))
    return CovariateMatrix(values=values, column_names=tuple(f"x{p + 1}" for p in range(P)))


def _run_recursion(
    theta: ParameterVector,
    x_gamma: np.ndarray,
    uniforms: np.ndarray,
    eta0: np.ndarray,
) -> np.ndarray:
    """Sequential simulation given precomputed covariate drive gamma'X_t.

    ``eta`` at step 0 equals the initial value; each later step is driven by
    the previous step's covariate row, response and latent value.  Levels
    are drawn by locating the uniform in the cumulative probability cells.
    """
    total = uniforms.shape[0]
    K = theta.K
    omega, alpha, beta = theta.omega, theta.alpha, theta.beta
    levels = np.empty(total, dtype=np.int64)
    eta = eta0.copy()
    for t in range(total):
        if t > 0:
            y_prev = levels[t - 1]
            a = alpha[y_prev - 1] if y_prev >= 1 else 0.0
            eta = omega + x_gamma[t - 1] + a + beta * eta
        cells = np.cumsum(probabilities_from_eta(eta[None, :])[0])
        levels[t] = min(int(np.searchsorted(cells, uniforms[t], side="right")), K)
    return levels


def _full_covariates(
    config: SimConfig, covariates: CovariateMatrix | None, rng: np.random.Generator
) -> np.ndarray:
    """Recorded covariates preceded by burn-in draws from the config stream."""
    burn = rng.standard_normal((config.burn_in, config.P))
    if covariates is None:
        recorded = rng.standard_normal((config.n, config.P))
    else:
        if covariates.n != config.n or covariates.P != config.P:
            raise DataError(
                f"covariates with shape ({covariates.n}, {covariates.P}) do not match "
                f"config (n={config.n}, P={config.P})"
            )
        recorded = covariates.values
    return np.vstack([burn, recorded]) if config.burn_in else np.asarray(recorded)


def simulate_path(
    config: SimConfig,
    covariates: CovariateMatrix | None = None,
    uniforms=None,
) -> OrdinalSeries:
    """Simulate one ordinal path; burn-in steps are generated then discarded.

    If ``covariates`` is given it supplies the recorded-phase rows (burn-in
    covariates still come from the config's stream).  If ``uniforms`` is
    given it supplies the recorded-phase innovations, which must lie in
    [0, 1).
    """
    cov_rng, uni_rng = _streams(config.seed, 2)
    x_full = _full_covariates(config, covariates, cov_rng)
    u_full = uni_rng.random(config.burn_in + config.n)
    if uniforms is not None:
        uniforms = np.asarray(uniforms, dtype=float)
        if uniforms.shape != (config.n,):
            raise DataError(
                f"uniforms must have length n={config.n}, got shape {uniforms.shape}"
            )
        if np.any(uniforms < 0.0) or np.any(uniforms >= 1.0):
            raise DataError("uniforms must lie in [0, 1)")
        u_full[config.burn_in :] = uniforms
    x_gamma = x_full @ config.theta.gamma
    eta0 = np.full(config.theta.K, config.eta0, dtype=float)
    levels = _run_recursion(config.theta, x_gamma, u_full, eta0)
    return OrdinalSeries(levels=levels[config.burn_in :], K=config.theta.K)


def simulate_paired_sites(
    config1: SimConfig,
    config2: SimConfig,
    coupling: Coupling,
    covariates1: CovariateMatrix | None = None,
    covariates2: CovariateMatrix | None = None,
) -> tuple[OrdinalSeries, OrdinalSeries, CovariateMatrix, CovariateMatrix]:
    """Simulate two sites with coupled uniform streams.

    Covariate streams are per-site (independent whenever the two configs
    carry distinct seeds).  Under ``COMMON`` the second site reuses the first
    site's uniforms; under ``ANTITHETIC`` it uses their reflection 1 - U,
    applied to the burn-in as well as the recorded phase.
    """
    if config1.n != config2.n:
        raise DataError(f"paired sites need equal n, got {config1.n} and {config2.n}")
    if config1.burn_in != config2.burn_in:
        raise DataError("paired sites need equal burn_in")
    coupling = Coupling(coupling)
    cov_rng1, uni_rng1 = _streams(config1.seed, 2)
    cov_rng2, uni_rng2 = _streams(config2.seed, 2)
    total = config1.burn_in + config1.n
    u1 = uni_rng1.random(total)
    if coupling is Coupling.INDEPENDENT:
        u2 = uni_rng2.random(total)
    elif coupling is Coupling.COMMON:
        u2 = u1.copy()
    else:
        u2 = 1.0 - u1

    x1_full = _full_covariates(config1, covariates1, cov_rng1)
    x2_full = _full_covariates(config2, covariates2, cov_rng2)
    eta0_1 = np.full(config1.theta.K, config1.eta0, dtype=float)
    eta0_2 = np.full(config2.theta.K, config2.eta0, dtype=float)
    levels1 = _run_recursion(config1.theta, x1_full @ config1.theta.gamma, u1, eta0_1)
    levels2 = _run_recursion(config2.theta, x2_full @ config2.theta.gamma, u2, eta0_2)
    burn = config1.burn_in
    out1 = OrdinalSeries(levels=levels1[burn:], K=config1.theta.K)
    out2 = OrdinalSeries(levels=levels2[burn:], K=config2.theta.K)
    cov1 = CovariateMatrix(values=x1_full[burn:], column_names=tuple(f"x{p + 1}" for p in range(config1.P)))
    cov2 = CovariateMatrix(values=x2_full[burn:], column_names=tuple(f"x{p + 1}" for p in range(config2.P)))
    return out1, out2, cov1, cov2
