"""Covariate-set search with adequacy filtering and AIC ranking.

Each candidate covariate set is fitted, screened by the Portmanteau test
(candidates whose adequacy is rejected at the chosen level are dropped) and
by the at-bound rule (candidates with a feedback estimate pinned at the box
boundary are dropped).  Survivors are ranked by the number of covariate
effects significant at the 95% level, ties broken by AIC, then candidate
order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AcarError, DataError
from .fit import FitConfig, FitResult, fit
from .inference import portmanteau_test
from .params import OrdinalSeries
from .data import SeasonalCovariateTable

Z_95 = 1.959963984540054


@dataclass
class CandidateReport:
    """Outcome of one candidate covariate set."""

    index: int
    columns: tuple[str, ...]
    aic: float | None = None
    negloglik: float | None = None
    portmanteau_statistic: float | None = None
    portmanteau_p: float | None = None
    n_significant: int | None = None
    at_bound: bool = False
    passed: bool = False
    excluded_reason: str | None = None
    theta_hat: list[float] | None = None
    t_stats: list[float] | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "columns": list(self.columns),
            "aic": self.aic,
            "negloglik": self.negloglik,
            "portmanteau_statistic": self.portmanteau_statistic,
            "portmanteau_p": self.portmanteau_p,
            "n_significant": self.n_significant,
            "at_bound": self.at_bound,
            "passed": self.passed,
            "excluded_reason": self.excluded_reason,
            "theta_hat": self.theta_hat,
            "t_stats": self.t_stats,
        }


@dataclass
class ModelSearchReport:
    """Full ledger of a covariate search plus the selected candidate."""

    candidates: list[CandidateReport]
    selected_index: int | None
    q: int
    alpha: float
    fits: dict[int, FitResult] = field(default_factory=dict, repr=False)

    @property
    def selected(self) -> CandidateReport | None:
        if self.selected_index is None:
            return None
        return self.candidates[self.selected_index]

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "alpha": self.alpha,
            "selected_index": self.selected_index,
            "candidates": [c.to_dict() for c in self.candidates],
        }


def _check_quadratic_rule(columns) -> None:
    names = set(columns)
    for name in columns:
        if name.startswith("sq_") and name[3:] not in names:
            raise DataError(
                f"candidate includes {name} without its linear term {name[3:]}"
            )


def search_models(
    series: OrdinalSeries,
    table: SeasonalCovariateTable,
    candidate_sets,
    q: int = 1,
    alpha: float = 0.05,
    fit_config: FitConfig | None = None,
) -> ModelSearchReport:
    """Fit every candidate covariate set and select the best survivor.

    Candidates must respect the quadratic rule: a squared column (named
    ``sq_<linear>``) may only appear together with its linear term.
    Per-candidate failures are recorded in the ledger, never raised.
    """
    candidate_sets = [tuple(c) for c in candidate_sets]
    if not candidate_sets:
        raise DataError("no candidate covariate sets supplied")
    for columns in candidate_sets:
        _check_quadratic_rule(columns)
    fit_config = fit_config or FitConfig()
    reports: list[CandidateReport] = []
    fits: dict[int, FitResult] = {}
    for index, columns in enumerate(candidate_sets):
        report = CandidateReport(index=index, columns=columns)
        reports.append(report)
        try:
            matrix = table.subset(columns).matrix_for_years(table.years)
            if matrix.n != series.n:
                raise DataError(
                    f"series length {series.n} does not match table rows {matrix.n}"
                )
            result = fit(series, matrix, fit_config)
            diag = portmanteau_test(result, q)
        except AcarError as exc:
            report.excluded_reason = f"failed: {exc}"
            continue
        report.aic = result.aic
        report.negloglik = result.negloglik
        report.portmanteau_statistic = diag.statistic
        report.portmanteau_p = diag.p_value
        report.at_bound = bool(result.at_bound.any())
        report.theta_hat = result.theta_hat.to_array().tolist()
        if result.t_stats is not None:
            report.t_stats = result.t_stats.tolist()
            gamma_t = result.t_stats[result.K : result.K + result.P]
            report.n_significant = int(np.sum(np.abs(gamma_t) > Z_95))
        fits[index] = result
        if not result.converged:
            report.excluded_reason = "optimizer did not converge"
        elif diag.p_value < alpha:
            report.excluded_reason = "adequacy rejected by the Portmanteau test"
        elif report.at_bound:
            report.excluded_reason = "at-bound"
        elif report.n_significant is None:
            report.excluded_reason = "no standard errors available"
        else:
            report.passed = True

    survivors = [r for r in reports if r.passed]
    selected = None
    if survivors:
        survivors.sort(key=lambda r: (-r.n_significant, r.aic, r.index))
        selected = survivors[0].index
    return ModelSearchReport(
        candidates=reports, selected_index=selected, q=q, alpha=alpha, fits=fits
    )


def enumerate_candidate_sets(
    columns,
    quadratic_for=(),
    max_covariates: int = 8,
    max_candidates: int = 512,
):
    """All covariate subsets up to ``max_covariates`` columns.

    Each column in ``quadratic_for`` contributes three states (absent,
    linear, linear plus its ``sq_`` partner); every other column two.  Raises
    when the bounded enumeration still exceeds ``max_candidates``.
    """
    columns = list(columns)
    quadratic = set(quadratic_for)
    unknown = quadratic - set(columns)
    if unknown:
        raise DataError(f"quadratic columns not in the column list: {sorted(unknown)}")
    choices = []
    for name in columns:
        states = [(), (name,)]
        if name in quadratic:
            states.append((name, f"sq_{name}"))
        choices.append(states)
    out = []
    for combo in itertools.product(*choices):
        flat = tuple(itertools.chain.from_iterable(combo))
        if 0 < len(flat) <= max_covariates:
            out.append(flat)
            if len(out) > max_candidates:
                raise DataError(
                    f"candidate enumeration exceeds {max_candidates} sets; "
                    "narrow the column list or lower max_covariates"
                )
    if not out:
        raise DataError("no candidate sets within the covariate limit")
    return out
