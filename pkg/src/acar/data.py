"""CSV ingestion, defoliation-level coding and seasonal climate covariates.

File formats
------------
* ordinal series: columns ``year,level``
* daily climate: columns ``date,tmax,tmin,prcp,snow`` with ISO dates;
  temperatures in degrees C, precipitation and snow depth in mm; empty
  cells are missing values
* covariate table: column ``year`` (the response year each row drives)
  plus named covariate columns

Seasons are fixed: spring is April-June, summer is July-September.

Alignment contract
------------------
The model consumes covariate row ``t-1`` when forming the latent value at
``t``.  A covariate table built with ``lag = L`` therefore stores, in the
row labelled with response year ``y``, the climate statistics of calendar
year ``y - L + 1``; combined with the model's one-step lag the climate of
year ``y - L`` drives the response of year ``y``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import DataError, DataWarning
from .params import CovariateMatrix, OrdinalSeries

SPRING_MONTHS = (4, 5, 6)
SUMMER_MONTHS = (7, 8, 9)
DEFAULT_SCALE = 0.1
DEFAULT_LAG = 2
DEFAULT_MISSING_THRESHOLD = 0.2

TEMPERATURE_COLUMNS = (
    "range_tmax_spring",
    "range_tmax_summer",
    "range_tmin_spring",
    "range_tmin_summer",
    "diff_mean_tmax_spring",
    "diff_mean_tmax_summer",
    "diff_mean_tmin_spring",
    "diff_mean_tmin_summer",
)
PRECIPITATION_COLUMNS = ("log_prcp", "log_snow", "diff_log_prcp", "diff_log_snow")
COVARIATE_COLUMNS = (
    TEMPERATURE_COLUMNS
    + PRECIPITATION_COLUMNS
    + tuple(f"sq_{name}" for name in TEMPERATURE_COLUMNS)
)


def classify_defoliation(proportions) -> OrdinalSeries:
    """Code per-year defoliated-tree proportions into levels 0-3.

    Exactly zero maps to level 0; (0, 0.35] to 1 (light); (0.35, 0.70] to 2
    (moderate); (0.70, 1] to 3 (severe).
    """
    p = np.asarray(proportions, dtype=float)
    if p.ndim != 1:
        raise DataError("proportions must be one-dimensional")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        bad = np.argwhere(~np.isfinite(p) | (p < 0.0) | (p > 1.0))[0][0]
        raise DataError(f"proportion out of [0, 1] at position {bad}: {p[bad]}")
    levels = np.zeros(p.size, dtype=np.int64)
    levels[p > 0.0] = 1
    levels[p > 0.35] = 2
    levels[p > 0.70] = 3
    return OrdinalSeries(levels=levels, K=3)


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``year,level`` CSV; returns (years, levels) sorted by year."""
    frame = pd.read_csv(path)
    missing = {"year", "level"} - set(frame.columns)
    if missing:
        raise DataError(f"series file {path} lacks column(s) {sorted(missing)}")
    frame = frame.sort_values("year")
    years = frame["year"].to_numpy()
    levels = frame["level"].to_numpy()
    if np.any(levels != levels.astype(np.int64)):
        raise DataError(f"series file {path} contains non-integer level codes")
    return years.astype(np.int64), levels.astype(np.int64)


def load_ordinal_series(path, K: int | None = None) -> OrdinalSeries:
    """Load an ordinal series from a ``year,level`` CSV."""
    years, levels = read_series_csv(path)
    if np.any(np.diff(years) != 1):
        warnings.warn(
            f"series years in {path} are not consecutive", DataWarning, stacklevel=2
        )
    if K is None:
        K = int(levels.max()) if levels.size else 1
    if levels.size and levels.max() > K:
        raise DataError(
            f"series file {path} contains level {levels.max()} above K={K}"
        )
    return OrdinalSeries(levels=levels, K=K)


def load_daily_climate(path) -> pd.DataFrame:
    """Load a daily climate CSV with columns date,tmax,tmin,prcp,snow."""
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = {"date", "tmax", "tmin", "prcp", "snow"} - set(frame.columns)
    if missing:
        raise DataError(f"climate file {path} lacks column(s) {sorted(missing)}")
    frame = frame.copy()
    frame["date"] = pd.to_datetime(frame["date"])
    for col in ("tmax", "tmin", "prcp", "snow"):
        frame[col] = pd.to_numeric(frame[col], errors="coerce")
    both = frame["tmax"].notna() & frame["tmin"].notna()
    bad = frame.loc[both & (frame["tmin"] > frame["tmax"])]
    if len(bad):
        raise DataError(
            f"tmin exceeds tmax on {len(bad)} day(s), first on "
            f"{bad['date'].iloc[0].date()}"
        )
    return frame.sort_values("date").reset_index(drop=True)


@dataclass
class SeasonalCovariateTable:
    """Per-response-year climate covariates, already aligned for fitting."""

    years: np.ndarray
    climate_years: np.ndarray
    values: np.ndarray
    column_names: tuple[str, ...]
    scale: float
    lag: int
    dropped_years: dict[int, str] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.years.size

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.column_names))
        frame.insert(0, "climate_year", self.climate_years)
        frame.insert(0, "year", self.years)
        return frame

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.column_names.index(name)
        except ValueError:
            raise DataError(f"no covariate column named {name!r}") from None
        return self.values[:, idx]

    def subset(self, names) -> "SeasonalCovariateTable":
        idx = [self.column_names.index(n) for n in names]
        return SeasonalCovariateTable(
            years=self.years,
            climate_years=self.climate_years,
            values=self.values[:, idx],
            column_names=tuple(names),
            scale=self.scale,
            lag=self.lag,
            dropped_years=dict(self.dropped_years),
        )

    def restrict_to_years(self, years) -> "SeasonalCovariateTable":
        """Keep only the rows whose response year is in ``years``."""
        wanted = set(int(y) for y in np.asarray(years))
        mask = np.array([int(y) in wanted for y in self.years])
        return SeasonalCovariateTable(
            years=self.years[mask],
            climate_years=self.climate_years[mask],
            values=self.values[mask],
            column_names=self.column_names,
            scale=self.scale,
            lag=self.lag,
            dropped_years=dict(self.dropped_years),
        )

    def matrix_for_years(self, years) -> CovariateMatrix:
        """Covariate rows for the given response years, in order."""
        years = np.asarray(years, dtype=np.int64)
        lookup = {int(y): i for i, y in enumerate(self.years)}
        rows = []
        for y in years:
            if int(y) not in lookup:
                raise DataError(f"no covariate row for response year {int(y)}")
            rows.append(lookup[int(y)])
        return CovariateMatrix(values=self.values[rows], column_names=self.column_names)


def _season_stats(group: pd.DataFrame, months, threshold: float):
    """(range_tmax, range_tmin, mean_tmax, mean_tmin) or a failure reason."""
    season = group[group["date"].dt.month.isin(months)]
    n_days = len(season)
    if n_days == 0:
        return None, "season has no rows"
    stats = []
    for col in ("tmax", "tmin"):
        present = season[col].dropna()
        if len(present) == 0:
            return None, f"all {col} values missing for the season"
        if len(present) < (1.0 - threshold) * n_days:
            return None, f"more than {threshold:.0%} of {col} values missing"
        stats.append((present.max() - present.min(), present.mean()))
    (rng_tmax, mean_tmax), (rng_tmin, mean_tmin) = stats
    return (float(rng_tmax), float(rng_tmin), float(mean_tmax), float(mean_tmin)), None


def _annual_log_total(group: pd.DataFrame, col: str, threshold: float):
    present = group[col].dropna()
    if len(present) < (1.0 - threshold) * len(group):
        return None, f"more than {threshold:.0%} of {col} values missing"
    total = float(present.sum())
    if total <= 0:
        return None, f"annual {col} total is not positive"
    return float(np.log(total)), None


def build_seasonal_covariates(
    daily: pd.DataFrame,
    scale: float = DEFAULT_SCALE,
    lag: int = DEFAULT_LAG,
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD,
) -> SeasonalCovariateTable:
    """Turn daily climate records into the per-year model covariates.

    Per climate year: the range (max minus min across days) of daily tmax
    and tmin over spring and summer, interannual differences of the seasonal
    means, the log annual precipitation and snowfall totals plus their
    interannual differences, and exact squares of every temperature column.
    Temperature columns are multiplied by ``scale`` before squaring.

    Years failing the per-season completeness threshold are dropped and
    reported; rows whose interannual differences straddle a dropped or
    absent year are dropped as well.  Completeness is measured against the
    rows recorded for the season (a value missing means an empty cell);
    seasons with no rows at all are dropped outright.
    """
    if not len(daily):
        raise DataError("climate table is empty")
    if lag < 1:
        raise DataError("lag must be at least 1")
    daily = daily.copy()
    daily["date"] = pd.to_datetime(daily["date"])
    dropped: dict[int, str] = {}
    per_year: dict[int, dict[str, float]] = {}
    for year, group in daily.groupby(daily["date"].dt.year):
        year = int(year)
        row: dict[str, float] = {}
        ok = True
        for label, months in (("spring", SPRING_MONTHS), ("summer", SUMMER_MONTHS)):
            stats, reason = _season_stats(group, months, missing_threshold)
            if stats is None:
                dropped[year] = f"{label}: {reason}"
                ok = False
                break
            rng_tmax, rng_tmin, mean_tmax, mean_tmin = stats
            row[f"range_tmax_{label}"] = scale * rng_tmax
            row[f"range_tmin_{label}"] = scale * rng_tmin
            row[f"mean_tmax_{label}"] = scale * mean_tmax
            row[f"mean_tmin_{label}"] = scale * mean_tmin
        if not ok:
            continue
        for col, name in (("prcp", "log_prcp"), ("snow", "log_snow")):
            value, reason = _annual_log_total(group, col, missing_threshold)
            if value is None:
                dropped[year] = reason
                ok = False
                break
            row[name] = value
        if ok:
            per_year[year] = row

    years_out, climate_years, rows = [], [], []
    for year in sorted(per_year):
        prev = per_year.get(year - 1)
        if prev is None:
            reason = dropped.get(year - 1, "previous year unavailable")
            dropped.setdefault(year, f"no interannual difference: {reason}")
            continue
        row = per_year[year]
        values = {
            "range_tmax_spring": row["range_tmax_spring"],
            "range_tmax_summer": row["range_tmax_summer"],
            "range_tmin_spring": row["range_tmin_spring"],
            "range_tmin_summer": row["range_tmin_summer"],
            "diff_mean_tmax_spring": row["mean_tmax_spring"] - prev["mean_tmax_spring"],
            "diff_mean_tmax_summer": row["mean_tmax_summer"] - prev["mean_tmax_summer"],
            "diff_mean_tmin_spring": row["mean_tmin_spring"] - prev["mean_tmin_spring"],
            "diff_mean_tmin_summer": row["mean_tmin_summer"] - prev["mean_tmin_summer"],
            "log_prcp": row["log_prcp"],
            "log_snow": row["log_snow"],
            "diff_log_prcp": row["log_prcp"] - prev["log_prcp"],
            "diff_log_snow": row["log_snow"] - prev["log_snow"],
        }
        for name in TEMPERATURE_COLUMNS:
            values[f"sq_{name}"] = values[name] ** 2
        years_out.append(year + lag - 1)
        climate_years.append(year)
        rows.append([values[name] for name in COVARIATE_COLUMNS])

    if not rows:
        raise DataError("no usable climate years after applying the missing-data policy")
    return SeasonalCovariateTable(
        years=np.array(years_out, dtype=np.int64),
        climate_years=np.array(climate_years, dtype=np.int64),
        values=np.array(rows, dtype=float),
        column_names=COVARIATE_COLUMNS,
        scale=scale,
        lag=lag,
        dropped_years=dropped,
    )


def load_covariate_table(path) -> SeasonalCovariateTable:
    """Read a covariate table CSV (year plus named columns) back in."""
    frame = pd.read_csv(path, float_precision="round_trip")
    if "year" not in frame.columns:
        raise DataError(f"covariate file {path} lacks a 'year' column")
    climate = (
        frame["climate_year"].to_numpy(dtype=np.int64)
        if "climate_year" in frame.columns
        else frame["year"].to_numpy(dtype=np.int64)
    )
    names = [c for c in frame.columns if c not in ("year", "climate_year")]
    return SeasonalCovariateTable(
        years=frame["year"].to_numpy(dtype=np.int64),
        climate_years=climate,
        values=frame[names].to_numpy(dtype=float),
        column_names=tuple(names),
        scale=float("nan"),
        lag=0,
        dropped_years={},
    )


def align_series_and_table(
    series_years: np.ndarray,
    levels: np.ndarray,
    table: SeasonalCovariateTable,
    K: int,
) -> tuple[OrdinalSeries, CovariateMatrix, np.ndarray]:
    """Intersect a dated series with a covariate table on response years.

    The model recursion needs consecutive time steps, so the longest
    contiguous run of common years is used; anything outside it is dropped
    with a warning.
    """
    common = np.intersect1d(series_years, table.years)
    if common.size < 3:
        raise DataError(
            f"only {common.size} common year(s) between series and covariates"
        )
    runs = np.split(common, np.nonzero(np.diff(common) != 1)[0] + 1)
    best = max(runs, key=len)
    if len(best) < common.size:
        warnings.warn(
            f"keeping the longest contiguous run of {len(best)} years "
            f"({best[0]}-{best[-1]}); {common.size - len(best)} common year(s) dropped",
            DataWarning,
            stacklevel=2,
        )
    year_to_level = {int(y): int(v) for y, v in zip(series_years, levels)}
    kept_levels = np.array([year_to_level[int(y)] for y in best], dtype=np.int64)
    series = OrdinalSeries(levels=kept_levels, K=K)
    matrix = table.matrix_for_years(best)
    return series, matrix, best


def write_series_csv(path, years, levels) -> None:
    frame = pd.DataFrame({"year": np.asarray(years), "level": np.asarray(levels)})
    frame.to_csv(path, index=False)


def write_covariates_csv(path, years, matrix: CovariateMatrix) -> None:
    frame = pd.DataFrame(matrix.values, columns=list(matrix.column_names))
    frame.insert(0, "year", np.asarray(years))
    frame.to_csv(path, index=False, float_format="%.17g")


def write_table_csv(path, table: SeasonalCovariateTable) -> None:
    table.to_frame().to_csv(path, index=False, float_format="%.17g")
