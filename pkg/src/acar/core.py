"""Model mathematics: latent recursion, probabilities, likelihood, derivatives.

Time convention
---------------
Observations are indexed ``t = 0..n-1``.  The first observation seeds the
recursion: ``eta[0]`` holds the configured initial latent value and the
one-hot of observation 0 feeds the ``t = 1`` update.  Likelihood terms,
scores, information matrices and residuals therefore run over the scored
range ``t = 1..n-1`` (``m = n - 1`` terms); all per-observation outputs of
this module are aligned with that range.

The latent process is, per category ``j = 1..K``,

    eta[j, t] = omega_j + gamma'X[t-1] + alpha'Ybar[t-1] + beta_j * eta[j, t-1]

and probabilities follow from the cumulative sums ``S_k = sum_{j<=k} eta_j``
through ``pi_k = exp(S_k) / (1 + sum_i exp(S_i))`` with ``pi_0`` the
complement.  All probability computations subtract the running maximum of
the cumulative sums before exponentiating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import NumericalError
from .params import (
    DEFAULT_EPSILON,
    DEFAULT_ETA0,
    CovariateMatrix,
    OrdinalSeries,
    ParameterVector,
    validate_parameters,
)

__all__ = [
    "LatentPath",
    "ResidualMatrix",
    "ModelData",
    "compute_latent_path",
    "latent_gradients",
    "adjacent_to_probs",
    "probabilities_from_eta",
    "survivor_from_eta",
    "nll_terms",
    "negative_log_likelihood",
    "score_path",
    "hessian_path",
    "residual_path",
]


@dataclass
class LatentPath:
    """Latent process values and, optionally, their parameter gradients.

    ``eta`` has shape (n, K) with row 0 equal to the initial value ``eta0``;
    ``grad`` has shape (n, K, 3K+P) with row 0 identically zero.  Gradients
    obey the per-category recursions: each category's derivative row is
    driven by its own beta only, so cross-category omega/beta derivatives
    vanish.
    """

    eta: np.ndarray
    eta0: np.ndarray
    grad: np.ndarray | None = None


@dataclass
class ResidualMatrix:
    """Survivor-scale residuals and their parameter Jacobian.

    ``e[t, k] = 1{Y_t >= k+1} - P(Y_t >= k+1 | past)`` for the scored range,
    shape (m, K); ``xi`` stacks the per-category Jacobian rows, shape
    (m, K, 3K+P).  Every residual lies strictly inside (-1, 1).
    """

    e: np.ndarray
    xi: np.ndarray


def _resolve_eta0(eta0, K: int) -> np.ndarray:
    if eta0 is None:
        return np.full(K, DEFAULT_ETA0)
    out = np.asarray(eta0, dtype=float)
    if out.ndim == 0:
        return np.full(K, float(out))
    if out.shape != (K,):
        raise NumericalError(f"eta0 must be scalar or length {K}, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NumericalError("eta0 must be finite")
    return out.copy()


def _check_alignment(series: OrdinalSeries, covariates: CovariateMatrix) -> None:
    if covariates.n != series.n:
        raise NumericalError(
            f"series length {series.n} does not match covariate row count {covariates.n}"
        )


def compute_latent_path(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    eta0=None,
    epsilon: float = DEFAULT_EPSILON,
) -> LatentPath:
    """Run the latent recursion over the full path.

    Row 0 of the returned ``eta`` is the initial value; rows ``1..n-1`` are
    produced by the recursion driven by the previous observation, covariate
    row and latent value.

    Raises
    ------
    NumericalError
        If a non-finite latent value appears, naming the first bad (t, j).
    """
    validate_parameters(theta, epsilon)
    _check_alignment(series, covariates)
    eta0 = _resolve_eta0(eta0, theta.K)
    n, K = series.n, theta.K
    eta = np.empty((n, K))
    eta[0] = eta0
    if n > 1:
        drive = covariates.values[: n - 1] @ theta.gamma
        drive += series.one_hot()[: n - 1] @ theta.alpha
        for k in range(K):
            x = theta.omega[k] + drive
            eta[1:, k] = lfilter(
                [1.0], [1.0, -theta.beta[k]], x, zi=[theta.beta[k] * eta0[k]]
            )[0]
    if not np.all(np.isfinite(eta)):
        t_bad, j_bad = np.argwhere(~np.isfinite(eta))[0]
        raise NumericalError(
            f"latent process overflowed at t={t_bad}, category j={j_bad + 1}"
        )
    return LatentPath(eta=eta, eta0=eta0)


def latent_gradients(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    path: LatentPath,
) -> LatentPath:
    """Fill ``path.grad`` with the recursive parameter derivatives of eta.

    The derivative of each category's latent value follows the same AR(1)
    recursion as the value itself, driven by the immediate derivative of the
    update, and is initialized at zero.
    """
    n, K, P = series.n, theta.K, theta.P
    d = theta.dim
    grad = np.zeros((n, K, d))
    if n > 1:
        onehot = series.one_hot()
        base = np.zeros((n - 1, K, d))
        for k in range(K):
            base[:, k, k] = 1.0  # d eta_k / d omega_k
            base[:, k, K : K + P] = covariates.values[: n - 1]
            base[:, k, K + P : 2 * K + P] = onehot[: n - 1]
            base[:, k, 2 * K + P + k] = path.eta[: n - 1, k]
            grad[1:, k, :] = lfilter([1.0], [1.0, -theta.beta[k]], base[:, k, :], axis=0)
    path.grad = grad
    return path


def adjacent_to_probs(eta_t) -> np.ndarray:
    """Map one latent vector (K,) to the level probabilities (pi_0..pi_K)."""
    eta_t = np.asarray(eta_t, dtype=float)
    return probabilities_from_eta(eta_t[None, :])[0]


def probabilities_from_eta(eta: np.ndarray) -> np.ndarray:
    """Vectorized probability transform: (m, K) latent rows -> (m, K+1).

    Uses max-subtraction on the cumulative sums so arbitrarily large latent
    values cannot overflow.
    """
    s = np.cumsum(eta, axis=1)
    m = np.maximum(s.max(axis=1), 0.0)
    expo = np.exp(s - m[:, None])
    base = np.exp(-m)
    denom = base + expo.sum(axis=1)
    out = np.empty((eta.shape[0], eta.shape[1] + 1))
    out[:, 0] = base / denom
    out[:, 1:] = expo / denom[:, None]
    return out


def survivor_from_eta(eta: np.ndarray) -> np.ndarray:
    """Conditional survivor probabilities P(Y >= k) for k = 1..K, shape (m, K)."""
    pi = probabilities_from_eta(eta)
    return np.cumsum(pi[:, :0:-1], axis=1)[:, ::-1]


def nll_terms(eta: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Per-observation negative log-likelihood for given latent rows.

    ``eta`` (m, K) and ``levels`` (m,) must already be aligned; each term is
    ``-log pi_{level}`` computed in the log domain.
    """
    eta = np.asarray(eta, dtype=float)
    levels = np.asarray(levels)
    s = np.cumsum(eta, axis=1)
    m = np.maximum(s.max(axis=1), 0.0)
    lse = m + np.log(np.exp(-m) + np.exp(s - m[:, None]).sum(axis=1))
    s_full = np.concatenate([np.zeros((eta.shape[0], 1)), s], axis=1)
    picked = s_full[np.arange(eta.shape[0]), levels]
    return lse - picked


def negative_log_likelihood(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    eta0=None,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Conditional negative log-likelihood over the scored range t = 1..n-1."""
    path = compute_latent_path(theta, series, covariates, eta0, epsilon)
    value = float(nll_terms(path.eta[1:], series.levels[1:]).sum())
    if not np.isfinite(value):
        raise NumericalError("negative log-likelihood is not finite")
    return value


def _require_grad(path: LatentPath) -> np.ndarray:
    if path.grad is None:
        raise NumericalError("latent gradients have not been computed for this path")
    return path.grad


def _survivor_residuals(eta_scored, levels_scored, K):
    sigma = survivor_from_eta(eta_scored)
    reached = (levels_scored[:, None] >= np.arange(1, K + 1)[None, :]).astype(float)
    return reached - sigma, sigma


def _information_kernels(sigma: np.ndarray) -> np.ndarray:
    """Per-t conditional covariance of the survivor indicators, shape (m, K, K).

    H[t, k, l] = sigma[t, max(k, l)] - sigma[t, k] * sigma[t, l].
    """
    K = sigma.shape[1]
    idx = np.maximum.outer(np.arange(K), np.arange(K))
    return sigma[:, idx] - sigma[:, :, None] * sigma[:, None, :]


def score_path(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    path: LatentPath,
) -> np.ndarray:
    """Per-term gradient of the negative log-likelihood, shape (m, 3K+P).

    Each row is ``-sum_k e[t, k] * grad_eta[t, k, :]``; the row sum over the
    scored range is the exact gradient of :func:`negative_log_likelihood`.
    """
    grad = _require_grad(path)
    e, _ = _survivor_residuals(path.eta[1:], series.levels[1:], theta.K)
    return -np.einsum("tk,tkd->td", e, grad[1:])


def hessian_path(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    path: LatentPath,
) -> np.ndarray:
    """Per-term information-style matrices, shape (m, 3K+P, 3K+P).

    Each term contracts the conditional survivor covariance against the
    latent gradients; the result is symmetrized before being returned.
    """
    grad = _require_grad(path)
    _, sigma = _survivor_residuals(path.eta[1:], series.levels[1:], theta.K)
    kern = _information_kernels(sigma)
    h = np.einsum("tkl,tki,tlj->tij", kern, grad[1:], grad[1:])
    return 0.5 * (h + np.swapaxes(h, 1, 2))


def residual_path(
    theta: ParameterVector,
    series: OrdinalSeries,
    covariates: CovariateMatrix,
    path: LatentPath,
) -> ResidualMatrix:
    """Survivor residuals e and their parameter Jacobian xi on the scored range."""
    grad = _require_grad(path)
    e, sigma = _survivor_residuals(path.eta[1:], series.levels[1:], theta.K)
    kern = _information_kernels(sigma)
    xi = -np.einsum("tkl,tld->tkd", kern, grad[1:])
    return ResidualMatrix(e=e, xi=xi)


class ModelData:
    """Precomputed views of one (series, covariates) pair for repeated evaluation.

    Bundles the arrays the optimizer touches on every objective call so that
    per-iteration work stays allocation-light.
    """

    def __init__(self, series: OrdinalSeries, covariates: CovariateMatrix, eta0=None):
        _check_alignment(series, covariates)
        self.series = series
        self.covariates = covariates
        self.K = series.K
        self.P = covariates.P
        self.n = series.n
        self.m = series.n - 1
        self.eta0 = _resolve_eta0(eta0, self.K)
        self.onehot = series.one_hot()
        self.levels_scored = series.levels[1:]
        self.x_lag = covariates.values[: self.n - 1]
        self.onehot_lag = self.onehot[: self.n - 1]
        # indicator 1{Y_t >= k}, scored range
        self.reached = (
            self.levels_scored[:, None] >= np.arange(1, self.K + 1)[None, :]
        ).astype(float)

    def theta(self, vec: np.ndarray) -> ParameterVector:
        return ParameterVector.from_array(vec, self.K, self.P)

    def eta_scored(self, vec: np.ndarray) -> np.ndarray:
        """Latent rows over the scored range for a flat parameter vector."""
        K, P = self.K, self.P
        omega = vec[:K]
        gamma = vec[K : K + P]
        alpha = vec[K + P : 2 * K + P]
        beta = vec[2 * K + P :]
        drive = self.x_lag @ gamma + self.onehot_lag @ alpha
        eta = np.empty((self.m, K))
        for k in range(K):
            eta[:, k] = lfilter(
                [1.0], [1.0, -beta[k]], omega[k] + drive, zi=[beta[k] * self.eta0[k]]
            )[0]
        return eta

    def value_and_gradient(self, vec: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective and its exact gradient in one pass.

        The gradient accumulates the latent derivatives through the adjoint
        of the AR(1) filter (a reversed filter of the residuals), which
        avoids materializing the full (n, K, 3K+P) gradient array.
        """
        K, P = self.K, self.P
        beta = vec[2 * K + P :]
        eta = self.eta_scored(vec)
        if not np.all(np.isfinite(eta)):
            return np.inf, np.zeros(vec.size)
        s = np.cumsum(eta, axis=1)
        mx = np.maximum(s.max(axis=1), 0.0)
        expo = np.exp(s - mx[:, None])
        base = np.exp(-mx)
        denom = base + expo.sum(axis=1)
        lse = mx + np.log(denom)
        s_full = np.concatenate([np.zeros((self.m, 1)), s], axis=1)
        value = float(lse.sum() - s_full[np.arange(self.m), self.levels_scored].sum())
        sigma = np.cumsum(expo[:, ::-1], axis=1)[:, ::-1] / denom[:, None]
        resid = self.reached - sigma
        # adjoint pass: w[t] = resid[t] + beta_k * w[t+1], per category
        w = np.empty_like(resid)
        for k in range(K):
            w[:, k] = lfilter([1.0], [1.0, -beta[k]], resid[::-1, k])[::-1]
        g = np.empty(vec.size)
        g[:K] = -w.sum(axis=0)
        g[K : K + P] = -self.x_lag.T @ w.sum(axis=1)
        g[K + P : 2 * K + P] = -self.onehot_lag.T @ w.sum(axis=1)
        eta_prev = np.vstack([self.eta0, eta[:-1]])
        g[2 * K + P :] = -np.einsum("tk,tk->k", w, eta_prev)
        return value, g

    def full_path(self, vec: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> LatentPath:
        theta = self.theta(vec)
        path = compute_latent_path(theta, self.series, self.covariates, self.eta0, epsilon)
        return latent_gradients(theta, self.series, self.covariates, path)
