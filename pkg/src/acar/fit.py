"""Conditional maximum-likelihood estimation and post-fit inference helpers.

The objective is minimized over the admissible box with L-BFGS-B using the
exact analytic gradient, restarted from ``n_starts`` random initial points;
the lowest final objective wins, ties broken by start index.  Standard
errors come from the sandwich ``J^-1 L J^-T / n`` built from the per-term
information matrices and score outer products, with a condition-number
guard instead of silent regularization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from .core import (
    LatentPath,
    ModelData,
    ResidualMatrix,
    hessian_path,
    residual_path,
    score_path,
)
from .exceptions import ConvergenceWarning, DataWarning, NumericalError
from .params import (
    DEFAULT_EPSILON,
    DEFAULT_ETA0,
    CovariateMatrix,
    OrdinalSeries,
    ParameterVector,
)

CONDITION_LIMIT = 1e12
AT_BOUND_SLACK = 1e-9

# random-start boxes for the multi-start protocol
START_RANGE_LINEAR = (-2.0, 2.0)
START_RANGE_FEEDBACK = (-0.9, 0.9)


@dataclass
class FitConfig:
    """Settings for the multi-start box-constrained optimization."""

    n_starts: int = 20
    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    objective_tolerance: float = 1e-9
    seed: int = 0
    eta0: float = DEFAULT_ETA0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")


@dataclass
class FitResult:
    """Outcome of one conditional maximum-likelihood fit."""

    theta_hat: ParameterVector
    negloglik: float
    aic: float
    covariance: np.ndarray | None
    std_errors: np.ndarray | None
    t_stats: np.ndarray | None
    residuals: ResidualMatrix
    J_hat: np.ndarray
    L_hat: np.ndarray
    converged: bool
    at_bound: np.ndarray
    scores: np.ndarray
    path: LatentPath
    n_obs: int
    epsilon: float
    eta0: np.ndarray
    grad_norm: float
    best_start: int
    n_starts_converged: int
    condition_number_J: float
    warnings: list[str] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.theta_hat.K

    @property
    def P(self) -> int:
        return self.theta_hat.P

    def to_dict(self) -> dict:
        """Schema-stable mapping used by the report writers."""
        return {
            "theta_hat": self.theta_hat.to_array().tolist(),
            "parameter_names": self.theta_hat.parameter_names(),
            "negloglik": self.negloglik,
            "aic": self.aic,
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "std_errors": None if self.std_errors is None else self.std_errors.tolist(),
            "t_stats": None if self.t_stats is None else self.t_stats.tolist(),
            "residuals": {
                "e": self.residuals.e.tolist(),
                "xi": self.residuals.xi.tolist(),
            },
            "J_hat": self.J_hat.tolist(),
            "L_hat": self.L_hat.tolist(),
            "converged": self.converged,
            "at_bound": self.at_bound.tolist(),
            "n_obs": self.n_obs,
            "K": self.K,
            "P": self.P,
            "epsilon": self.epsilon,
            "eta0": self.eta0.tolist(),
            "grad_norm": self.grad_norm,
            "best_start": self.best_start,
            "n_starts_converged": self.n_starts_converged,
            "condition_number_J": self.condition_number_J,
            "warnings": list(self.warnings),
        }


def _draw_starts(config: FitConfig, K: int, P: int, initial) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    lin_lo, lin_hi = START_RANGE_LINEAR
    fb_lo, fb_hi = START_RANGE_FEEDBACK
    starts = np.empty((config.n_starts, 3 * K + P))
    starts[:, : 2 * K + P] = rng.uniform(lin_lo, lin_hi, size=(config.n_starts, 2 * K + P))
    starts[:, 2 * K + P :] = rng.uniform(fb_lo, fb_hi, size=(config.n_starts, K))
    if initial is not None:
        starts[0] = np.asarray(initial, dtype=float).reshape(-1)
    return starts


def _bounds(K: int, P: int, epsilon: float) -> list[tuple[float, float]]:
    box = 1.0 / epsilon
    bounds = [(-box, box)] * (2 * K + P)
    bounds += [(-1.0 + epsilon, 1.0 - epsilon)] * K
    return bounds


def _projected_gradient_norm(x, g, bounds) -> float:
    pg = np.array(g, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if x[i] <= lo and pg[i] > 0:
            pg[i] = 0.0
        elif x[i] >= hi and pg[i] < 0:
            pg[i] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def fit(
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    config: FitConfig | None = None,
    initial=None,
) -> FitResult:
    """Estimate the model on one path by multi-start constrained optimization.

    Parameters
    ----------
    series, covariates
        Aligned response path and design matrix (row t-1 drives eta_t).
    config
        Optimization settings (default: 20 uniform random starts inside a
        centered sub-box, epsilon = 1e-6).
    initial
        Optional explicit starting vector; it replaces the first random
        start, so ``n_starts=1`` plus ``initial`` refits from that point only.
    """
    config = config or FitConfig()
    data = ModelData(series, covariates, config.eta0)
    K, P, d = data.K, data.P, 3 * data.K + data.P
    notes: list[str] = []
    if data.n < d + 2:
        notes.append(
            f"series length {data.n} is below the recommended minimum {d + 2}"
        )
        warnings.warn(notes[-1], DataWarning, stacklevel=2)
    if series.distinct_levels() < 2:
        notes.append("series is constant; the fit is unlikely to be informative")
        warnings.warn(notes[-1], DataWarning, stacklevel=2)
    observed = np.unique(series.levels)
    missing_levels = sorted(set(range(K + 1)) - set(int(v) for v in observed))
    if missing_levels:
        notes.append(f"levels never observed in the series: {missing_levels}")

    bounds = _bounds(K, P, config.epsilon)
    starts = _draw_starts(config, K, P, initial)
    options = {
        "maxiter": config.max_iterations,
        "ftol": config.objective_tolerance,
        "gtol": config.gradient_tolerance,
    }
    results = []
    for x0 in starts:
        res = minimize(
            data.value_and_gradient,
            np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds]),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options=options,
        )
        results.append(res)
    objectives = np.array(
        [r.fun if np.isfinite(r.fun) else np.inf for r in results]
    )
    best = int(np.argmin(objectives))
    best_res = results[best]
    converged = bool(best_res.status == 0) and np.isfinite(best_res.fun)
    n_ok = sum(1 for r in results if r.status == 0 and np.isfinite(r.fun))
    if n_ok == 0:
        notes.append("no optimization start converged")
        warnings.warn(notes[-1], ConvergenceWarning, stacklevel=2)

    theta_vec = np.asarray(best_res.x, dtype=float)
    theta_hat = ParameterVector.from_array(theta_vec, K, P)
    negloglik, grad_at_opt = data.value_and_gradient(theta_vec)
    grad_norm = _projected_gradient_norm(theta_vec, grad_at_opt, bounds)

    path = data.full_path(theta_vec, config.epsilon)
    scores = score_path(theta_hat, series, covariates, path)
    hess = hessian_path(theta_hat, series, covariates, path)
    residuals = residual_path(theta_hat, series, covariates, path)
    J_hat = hess.mean(axis=0)
    L_hat = scores.T @ scores / data.m
    at_bound = np.abs(theta_hat.beta) >= 1.0 - config.epsilon - AT_BOUND_SLACK
    if at_bound.any():
        notes.append("feedback estimate at the box boundary")

    covariance = std_errors = t_stats = None
    cond_J = float(np.linalg.cond(J_hat))
    try:
        covariance = _sandwich(J_hat, L_hat, data.m, cond_J)
        std_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_stats = np.where(std_errors > 0, theta_vec / std_errors, np.nan)
    except NumericalError as exc:
        notes.append(str(exc))

    return FitResult(
        theta_hat=theta_hat,
        negloglik=float(negloglik),
        aic=aic_value(float(negloglik), d),
        covariance=covariance,
        std_errors=std_errors,
        t_stats=t_stats,
        residuals=residuals,
        J_hat=J_hat,
        L_hat=L_hat,
        converged=converged,
        at_bound=at_bound,
        scores=scores,
        path=path,
        n_obs=data.m,
        epsilon=config.epsilon,
        eta0=data.eta0,
        grad_norm=grad_norm,
        best_start=best,
        n_starts_converged=n_ok,
        condition_number_J=cond_J,
        warnings=notes,
    )


def _sandwich(J_hat, L_hat, m: int, cond_J: float | None = None) -> np.ndarray:
    if cond_J is None:
        cond_J = float(np.linalg.cond(J_hat))
    if not np.isfinite(cond_J) or cond_J > CONDITION_LIMIT:
        raise NumericalError(
            f"information matrix is numerically singular (condition number {cond_J:.3e})",
            condition_number=cond_J,
        )
    inner = np.linalg.solve(J_hat, L_hat)
    cov = np.linalg.solve(J_hat, inner.T).T / m
    return 0.5 * (cov + cov.T)


def sandwich_covariance(
    theta_hat: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    eta0=None,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (J_hat, L_hat, covariance) evaluated at ``theta_hat``.

    ``J_hat`` is the average per-term information matrix, ``L_hat`` the
    average score outer product, and the covariance is ``J^-1 L J^-T / n``
    computed through linear solves.

    Raises
    ------
    NumericalError
        When ``J_hat`` is numerically singular; the error carries the
        condition-number estimate.
    """
    data = ModelData(series, covariates, eta0)
    if np.any(np.abs(theta_hat.beta) >= 1.0 - epsilon - AT_BOUND_SLACK):
        warnings.warn(
            "a feedback estimate sits at the box boundary; the asymptotic "
            "covariance is unreliable there",
            ConvergenceWarning,
            stacklevel=2,
        )
    vec = theta_hat.to_array()
    path = data.full_path(vec, epsilon)
    scores = score_path(theta_hat, series, covariates, path)
    hess = hessian_path(theta_hat, series, covariates, path)
    J_hat = hess.mean(axis=0)
    L_hat = scores.T @ scores / data.m
    return J_hat, L_hat, _sandwich(J_hat, L_hat, data.m)


def aic_value(negloglik: float, n_params: int) -> float:
    return 2.0 * n_params + 2.0 * negloglik


def aic(result: FitResult) -> float:
    """Akaike information criterion of a converged fit."""
    return aic_value(result.negloglik, result.theta_hat.dim)


@dataclass
class ThresholdResult:
    """Vertex of a quadratic covariate effect with a delta-method interval."""

    estimate: float
    std_error: float
    ci_low: float
    ci_high: float


def vertex_threshold(
    estimates,
    covariance,
    linear_index: int,
    quadratic_index: int,
    confidence: float = 0.95,
    truncate_at_zero: bool = True,
) -> ThresholdResult:
    """Vertex ``-b/(2a)`` of a fitted quadratic effect, with delta-method CI.

    ``estimates`` is the full coefficient vector and ``covariance`` its
    covariance matrix; only the (linear, quadratic) 2x2 block is used.  The
    interval is symmetric about the estimate; when ``truncate_at_zero`` is
    set and the estimate is non-negative, the lower end is clipped at zero
    (thresholds on a range scale cannot be negative).
    """
    estimates = np.asarray(estimates, dtype=float).reshape(-1)
    covariance = np.asarray(covariance, dtype=float)
    lin = estimates[linear_index]
    quad = estimates[quadratic_index]
    if abs(quad) < 1e-10:
        raise NumericalError(
            f"quadratic coefficient {quad} is too close to zero; vertex undefined"
        )
    estimate = -lin / (2.0 * quad)
    mu = np.array([1.0 / (2.0 * quad), -lin / (2.0 * quad**2)])
    block = covariance[np.ix_([linear_index, quadratic_index], [linear_index, quadratic_index])]
    var = float(mu @ block @ mu)
    if var < 0:
        raise NumericalError(f"delta-method variance is negative ({var})")
    std = float(np.sqrt(var))
    z = float(ndtri(0.5 + confidence / 2.0))
    lo, hi = estimate - z * std, estimate + z * std
    if truncate_at_zero and estimate >= 0.0:
        lo = max(0.0, lo)
    return ThresholdResult(estimate=float(estimate), std_error=std, ci_low=lo, ci_high=hi)


def quadratic_threshold(
    result: FitResult,
    linear_index: int,
    quadratic_index: int,
    confidence: float = 0.95,
    truncate_at_zero: bool = True,
) -> ThresholdResult:
    """Delta-method threshold from a fitted model's quadratic covariate pair."""
    if result.covariance is None:
        raise NumericalError(
            "fit carries no covariance matrix; threshold uncertainty unavailable"
        )
    return vertex_threshold(
        result.theta_hat.to_array(),
        result.covariance,
        linear_index,
        quadratic_index,
        confidence=confidence,
        truncate_at_zero=truncate_at_zero,
    )
