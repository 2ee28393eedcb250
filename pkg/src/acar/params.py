"""Parameter and data containers for the adjacent-category autoregression.

The model for an ordinal response ``Y_t`` in ``{0, ..., K}`` driven by ``P``
exogenous covariates carries ``3K + P`` parameters, laid out as

    theta = (omega_1..omega_K, gamma_1..gamma_P, alpha_1..alpha_K,
             beta_1..beta_K)

where ``omega`` are per-category intercepts, ``gamma`` the (shared-slope)
covariate effects, ``alpha`` the lagged-response effects and ``beta`` the
per-category feedback coefficients.  Stability requires ``|beta_j| < 1``;
estimation is carried out over the box where ``|beta_j| <= 1 - eps`` and
every other coordinate satisfies ``|theta_i| <= 1/eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, ParameterError

DEFAULT_EPSILON = 1e-6
DEFAULT_ETA0 = 0.5


def _as_float_vector(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ParameterVector:
    """Full parameter vector theta = (omega, gamma, alpha, beta).

    Parameters
    ----------
    omega : array_like, shape (K,)
        Per-category intercepts.
    gamma : array_like, shape (P,)
        Covariate effects, shared across categories.
    alpha : array_like, shape (K,)
        Effects of the lagged one-hot response.
    beta : array_like, shape (K,)
        Feedback coefficients on the lagged latent process.
    """

    omega: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _as_float_vector(self.omega, "omega"))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).reshape(-1))
        object.__setattr__(self, "alpha", _as_float_vector(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _as_float_vector(self.beta, "beta"))
        k = self.omega.size
        if self.alpha.size != k or self.beta.size != k:
            raise ParameterError(
                "omega, alpha and beta must all have length K; got "
                f"{k}, {self.alpha.size}, {self.beta.size}"
            )
        if k == 0:
            raise ParameterError("the model needs at least one non-zero category")

    @property
    def K(self) -> int:
        return self.omega.size

    @property
    def P(self) -> int:
        return self.gamma.size

    @property
    def dim(self) -> int:
        return 3 * self.K + self.P

    def to_array(self) -> np.ndarray:
        """Flatten to the canonical (omega, gamma, alpha, beta) layout."""
        return np.concatenate([self.omega, self.gamma, self.alpha, self.beta])

    @classmethod
    def from_array(cls, values, K: int, P: int) -> "ParameterVector":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != 3 * K + P:
            raise ParameterError(
                f"expected a vector of length {3 * K + P} for K={K}, P={P}, "
                f"got {values.size}"
            )
        return cls(
            omega=values[:K],
            gamma=values[K : K + P],
            alpha=values[K + P : 2 * K + P],
            beta=values[2 * K + P :],
        )

    def parameter_names(self) -> list[str]:
        names = [f"omega_{j + 1}" for j in range(self.K)]
        names += [f"gamma_{p + 1}" for p in range(self.P)]
        names += [f"alpha_{j + 1}" for j in range(self.K)]
        names += [f"beta_{j + 1}" for j in range(self.K)]
        return names

    def is_valid(self, epsilon: float = DEFAULT_EPSILON) -> bool:
        try:
            validate_parameters(self, epsilon)
        except ParameterError:
            return False
        return True


def validate_parameters(theta: ParameterVector, epsilon: float = DEFAULT_EPSILON) -> None:
    """Check that ``theta`` lies in the admissible box.

    The feedback coefficients must satisfy ``|beta_j| <= 1 - epsilon`` (which
    implies the stationarity condition ``|beta_j| < 1``) and every other
    coordinate must satisfy ``|theta_i| <= 1/epsilon``.

    Raises
    ------
    ParameterError
        Naming the first violated coordinate and the bound it breaks.
    """
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    box = 1.0 / epsilon
    names = theta.parameter_names()
    flat = theta.to_array()
    n_free = 2 * theta.K + theta.P
    for i in range(n_free):
        if not np.isfinite(flat[i]) or abs(flat[i]) > box:
            raise ParameterError(
                f"{names[i]} = {flat[i]} violates the magnitude bound |{names[i]}| <= {box}"
            )
    for i in range(n_free, flat.size):
        if not np.isfinite(flat[i]) or abs(flat[i]) > 1.0 - epsilon:
            raise ParameterError(
                f"{names[i]} = {flat[i]} violates the feedback bound "
                f"|{names[i]}| <= {1.0 - epsilon} required for stationarity"
            )


@dataclass(frozen=True)
class OrdinalSeries:
    """An observed path of ordinal levels in ``{0, ..., K}``.

    The one-hot view encodes level ``j >= 1`` as the indicator vector with a
    single one in position ``j``; level 0 is the all-zero row.
    """

    levels: np.ndarray
    K: int

    def __post_init__(self):
        levels = np.asarray(self.levels)
        if levels.ndim != 1:
            raise DataError(f"levels must be one-dimensional, got shape {levels.shape}")
        if not np.issubdtype(levels.dtype, np.integer):
            as_int = levels.astype(np.int64)
            if not np.array_equal(as_int, levels):
                raise DataError("levels must be integers")
            levels = as_int
        else:
            levels = levels.astype(np.int64)
        if levels.size and (levels.min() < 0 or levels.max() > self.K):
            raise DataError(
                f"levels must lie in {{0, ..., {self.K}}}; "
                f"found range [{levels.min()}, {levels.max()}]"
            )
        object.__setattr__(self, "levels", levels)

    @property
    def n(self) -> int:
        return self.levels.size

    def one_hot(self) -> np.ndarray:
        """Return the (n, K) one-hot view; level 0 maps to an all-zero row."""
        out = np.zeros((self.n, self.K))
        pos = self.levels >= 1
        out[np.nonzero(pos)[0], self.levels[pos] - 1] = 1.0
        return out

    @classmethod
    def from_one_hot(cls, one_hot) -> "OrdinalSeries":
        oh = np.asarray(one_hot, dtype=float)
        if oh.ndim != 2:
            raise DataError("one-hot input must be a 2-d array")
        if not np.all((oh == 0.0) | (oh == 1.0)) or np.any(oh.sum(axis=1) > 1):
            raise DataError("one-hot rows must contain at most a single 1")
        levels = np.where(oh.sum(axis=1) > 0, oh.argmax(axis=1) + 1, 0)
        return cls(levels=levels.astype(np.int64), K=oh.shape[1])

    def distinct_levels(self) -> int:
        return int(np.unique(self.levels).size)


@dataclass(frozen=True)
class CovariateMatrix:
    """An (n, P) design matrix aligned so that row t-1 drives eta_t."""

    values: np.ndarray
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"covariates must be a 2-d array, got shape {values.shape}")
        if values.size and not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite covariate at row {bad[0]}, column {bad[1]}")
        names = tuple(self.column_names)
        if not names:
            names = tuple(f"x{p + 1}" for p in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(
                f"{len(names)} column names for {values.shape[1]} covariate columns"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def P(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, n: int) -> "CovariateMatrix":
        return cls(values=np.zeros((n, 0)), column_names=())


# Parameter sets used throughout the simulation studies (K = 3, P = 5).
BENCHMARK_THETAS: dict[int, ParameterVector] = {
    1: ParameterVector(
        omega=[1.2, 0.7, 0.5],
        gamma=[-0.8, 1.5, -1.5, 2.0, 2.0],
        alpha=[0.3, -0.3, 0.5],
        beta=[0.8, -0.2, 0.3],
    ),
    2: ParameterVector(
        omega=[1.2, 0.7, 0.5],
        gamma=[0.8, -1.5, 1.5, -2.0, -2.0],
        alpha=[-0.3, 0.3, -0.5],
        beta=[-0.8, 0.2, -0.3],
    ),
    3: ParameterVector(
        omega=[1.2, 0.7, 1.5],
        gamma=[0.8, -1.5, -1.5, 2.0, -2.0],
        alpha=[0.3, -0.3, -0.5],
        beta=[-0.8, 0.2, -0.3],
    ),
}


def benchmark_theta(which: int) -> ParameterVector:
    """Return one of the built-in benchmark parameter sets (1, 2 or 3)."""
    try:
        return BENCHMARK_THETAS[int(which)]
    except (KeyError, ValueError):
        raise ParameterError(
            f"unknown benchmark parameter set {which!r}; choose one of 1, 2, 3"
        ) from None
