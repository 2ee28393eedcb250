"""Goodness-of-fit and two-model comparison tests.

The Portmanteau statistic scales the first ``q`` residual autocorrelations
by the inverse of their estimated asymptotic covariance ``W``; under a
correctly specified model it is asymptotically chi-square with ``K q``
degrees of freedom.  The comparison test contrasts two fitted parameter
vectors through the covariance ``V`` built from both sandwiches plus an
optional cross-score term.

Layout convention: stacked autocorrelation vectors (and the blocks of
``W``) are category-major, i.e. entry ``k*q + (h-1)`` holds lag ``h`` of
category ``k+1``.  All empirical expectations divide by the number of
scored observations, including lagged sums with fewer terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaincc

from .core import ResidualMatrix
from .exceptions import NumericalError
from .fit import CONDITION_LIMIT, FitResult

__all__ = [
    "PortmanteauResult",
    "ComparisonResult",
    "chi_square_upper_tail",
    "normal_upper_tail",
    "residual_autocorrelations",
    "estimate_W",
    "portmanteau_test",
    "cross_score_covariance",
    "comparison_covariance",
    "compare_models",
]

S_MODES = ("assumed-zero", "empirical")


def chi_square_upper_tail(x: float, df: int) -> float:
    """P(X > x) for a chi-square variable with ``df`` degrees of freedom."""
    if df < 1 or int(df) != df:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df}")
    if x < 0:
        raise ValueError(f"chi-square statistic must be non-negative, got {x}")
    return float(gammaincc(df / 2.0, x / 2.0))


def normal_upper_tail(z: float) -> float:
    """P(Z > z) for a standard normal variable."""
    return float(0.5 * erfc(z / np.sqrt(2.0)))


def _residual_array(residuals) -> np.ndarray:
    if isinstance(residuals, ResidualMatrix):
        return residuals.e
    return np.asarray(residuals, dtype=float)


def _lagged_products(e: np.ndarray, q: int) -> np.ndarray:
    """Rows (k*q + h-1) of e[t,k]*e[t-h,k] over t, zero-padded, shape (Kq, m)."""
    m, K = e.shape
    out = np.zeros((K * q, m))
    for k in range(K):
        for h in range(1, q + 1):
            out[k * q + h - 1, h:] = e[h:, k] * e[:-h, k]
    return out


def residual_autocorrelations(residuals, q: int) -> np.ndarray:
    """Stacked residual autocorrelations rho_1..rho_q, category-major, (Kq,)."""
    e = _residual_array(residuals)
    m = e.shape[0]
    if q < 1:
        raise ValueError("q must be at least 1")
    if q >= m:
        raise ValueError(f"q={q} must be smaller than the number of residuals {m}")
    return _lagged_products(e, q).sum(axis=1) / m


def _solve_spd(mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NumericalError(
            f"{what} is numerically singular (condition number {cond:.3e})",
            condition_number=cond,
        )
    return np.linalg.solve(mat, rhs)


def portmanteau_matrices(
    e: np.ndarray,
    xi: np.ndarray,
    scores: np.ndarray,
    J_hat: np.ndarray,
    L_hat: np.ndarray,
    q: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Return (rho, W_hat) from the per-term arrays of a fit.

    ``W = D + C A C' + G C' + C G'`` where ``A`` is the sandwich
    ``J^-1 L J^-T``, ``C`` collects lagged-residual/Jacobian cross moments,
    ``D`` the fourth-moment matrix of lagged residual products and ``G`` the
    estimation/autocorrelation cross term.  The result is symmetrized.
    """
    m, K = e.shape
    d = J_hat.shape[0]
    if q < 1 or q >= m:
        raise ValueError(f"need 1 <= q < {m}, got q={q}")
    prods = _lagged_products(e, q)
    rho = prods.sum(axis=1) / m
    D_hat = prods @ prods.T / m
    # G rows: mean of e_k,t e_k,t-h times minus the score, right-multiplied by J^-T
    M = -(prods @ scores) / m
    G_hat = _solve_spd(J_hat, M.T, "information matrix").T
    C_hat = np.zeros((K * q, d))
    for k in range(K):
        for h in range(1, q + 1):
            C_hat[k * q + h - 1] = e[: m - h, k] @ xi[h:, k, :] / m
    inner = _solve_spd(J_hat, L_hat, "information matrix")
    A = _solve_spd(J_hat, inner.T, "information matrix").T
    W = D_hat + C_hat @ A @ C_hat.T + G_hat @ C_hat.T + C_hat @ G_hat.T
    return rho, 0.5 * (W + W.T)


@dataclass
class PortmanteauResult:
    """Residual autocorrelation test outcome."""

    q: int
    rho: np.ndarray
    W_hat: np.ndarray
    statistic: float
    df: int
    p_value: float
    w_condition: float

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "rho": self.rho.tolist(),
            "W_hat": self.W_hat.tolist(),
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "w_condition": self.w_condition,
        }


def estimate_W(result: FitResult, q: int) -> np.ndarray:
    """Estimated asymptotic covariance of the scaled autocorrelation vector."""
    _, W = portmanteau_matrices(
        result.residuals.e, result.residuals.xi, result.scores,
        result.J_hat, result.L_hat, q,
    )
    return W


def portmanteau_test(result: FitResult, q: int) -> PortmanteauResult:
    """Adequacy test on the first ``q`` residual autocorrelations.

    The statistic is ``n rho' W^-1 rho`` computed through a linear solve;
    its null distribution is chi-square with ``K q`` degrees of freedom.
    The population-level non-degeneracy of ``W`` is assumed, not checked;
    only its sample condition number is guarded.

    Raises
    ------
    NumericalError
        If ``W`` is too ill-conditioned to invert reliably; the error
        carries the condition estimate.
    """
    rho, W = portmanteau_matrices(
        result.residuals.e, result.residuals.xi, result.scores,
        result.J_hat, result.L_hat, q,
    )
    cond = float(np.linalg.cond(W))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NumericalError(
            f"autocorrelation covariance W is numerically singular "
            f"(condition number {cond:.3e})",
            condition_number=cond,
        )
    stat = float(result.n_obs * rho @ np.linalg.solve(W, rho))
    if stat < 0:
        if stat < -1e-8:
            raise NumericalError(f"Portmanteau quadratic form is negative ({stat})")
        stat = 0.0
    df = result.K * q
    return PortmanteauResult(
        q=q,
        rho=rho,
        W_hat=W,
        statistic=stat,
        df=df,
        p_value=chi_square_upper_tail(stat, df),
        w_condition=cond,
    )


def cross_score_covariance(
    fit1: FitResult, fit2: FitResult, mode: str = "empirical"
) -> np.ndarray:
    """Cross covariance of the two sites' score processes.

    ``mode='assumed-zero'`` returns an exact zero matrix (the independent
    sites case); ``mode='empirical'`` averages ``s_t^(2) s_t^(1)'`` over the
    common scored range, which requires aligned series of equal length.
    """
    if mode not in S_MODES:
        raise ValueError(f"mode must be one of {S_MODES}, got {mode!r}")
    d1, d2 = fit1.theta_hat.dim, fit2.theta_hat.dim
    if d1 != d2:
        raise NumericalError(f"parameter dimensions differ: {d1} vs {d2}")
    if mode == "assumed-zero":
        return np.zeros((d1, d1))
    if fit1.n_obs != fit2.n_obs:
        raise NumericalError(
            f"empirical cross-score covariance needs equal lengths, "
            f"got {fit1.n_obs} and {fit2.n_obs}"
        )
    return fit2.scores.T @ fit1.scores / fit1.n_obs


def comparison_covariance(
    fit1: FitResult, fit2: FitResult, s_mode: str = "assumed-zero"
) -> np.ndarray:
    """Covariance ``V`` of the scaled difference of the two estimators.

    ``V = J1^-1 L1 J1^-T + J2^-1 L2 J2^-T + J2^-1 S J1^-T + J1^-1 S' J2^-T``
    with ``S`` the cross-score covariance; the result is symmetrized.  The
    population-level non-degeneracy of ``V`` is assumed, not checked.
    """
    S = cross_score_covariance(fit1, fit2, s_mode)
    A1 = _sandwich_unscaled(fit1.J_hat, fit1.L_hat)
    A2 = _sandwich_unscaled(fit2.J_hat, fit2.L_hat)
    # J2^-1 S J1^-T
    Z = _solve_spd(fit2.J_hat, S, "site-2 information matrix")
    cross = _solve_spd(fit1.J_hat, Z.T, "site-1 information matrix").T
    V = A1 + A2 + cross + cross.T
    return 0.5 * (V + V.T)


def _sandwich_unscaled(J_hat: np.ndarray, L_hat: np.ndarray) -> np.ndarray:
    inner = _solve_spd(J_hat, L_hat, "information matrix")
    return _solve_spd(J_hat, inner.T, "information matrix").T


@dataclass
class ComparisonResult:
    """Per-parameter and global equality tests for two fitted models."""

    per_param_z: np.ndarray
    per_param_p: np.ndarray
    global_statistic: float | None
    global_df: int
    global_p: float | None
    V_hat: np.ndarray
    S_mode: str
    n_obs: int

    def reject(self, alpha: float = 0.05) -> bool:
        if self.global_p is None:
            raise NumericalError("global comparison test unavailable (singular V)")
        return self.global_p < alpha

    def to_dict(self) -> dict:
        return {
            "per_param_z": self.per_param_z.tolist(),
            "per_param_p": self.per_param_p.tolist(),
            "global_statistic": self.global_statistic,
            "global_df": self.global_df,
            "global_p": self.global_p,
            "V_hat": self.V_hat.tolist(),
            "S_mode": self.S_mode,
            "n_obs": self.n_obs,
        }


def compare_models(
    fit1: FitResult, fit2: FitResult, s_mode: str = "assumed-zero"
) -> ComparisonResult:
    """Test equality of the two parameter vectors, per coordinate and globally.

    Per-parameter statistics are ``sqrt(n) (theta1_p - theta2_p) /
    sqrt(V[p, p])`` against a standard normal; the global statistic is the
    full quadratic form against chi-square with ``3K + P`` degrees of
    freedom.  A singular ``V`` disables the global test while per-parameter
    results remain available wherever the diagonal is positive.
    """
    if fit1.theta_hat.dim != fit2.theta_hat.dim:
        raise NumericalError("fits have different parameterizations")
    if fit1.n_obs != fit2.n_obs:
        raise NumericalError(
            f"comparison needs equal sample sizes, got {fit1.n_obs} and {fit2.n_obs}"
        )
    n = fit1.n_obs
    diff = fit1.theta_hat.to_array() - fit2.theta_hat.to_array()
    V = comparison_covariance(fit1, fit2, s_mode)
    var_diag = np.diag(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var_diag > 0, diff * np.sqrt(n / var_diag), np.nan)
    p = np.array([2.0 * normal_upper_tail(abs(v)) if np.isfinite(v) else np.nan for v in z])
    d = diff.size
    global_stat = global_p = None
    cond = float(np.linalg.cond(V))
    if np.isfinite(cond) and cond <= CONDITION_LIMIT:
        global_stat = float(n * diff @ np.linalg.solve(V, diff))
        if global_stat < 0:
            global_stat = 0.0 if global_stat > -1e-8 else None
        if global_stat is not None:
            global_p = chi_square_upper_tail(global_stat, d)
    return ComparisonResult(
        per_param_z=z,
        per_param_p=p,
        global_statistic=global_stat,
        global_df=d,
        global_p=global_p,
        V_hat=V,
        S_mode=s_mode,
        n_obs=n,
    )
