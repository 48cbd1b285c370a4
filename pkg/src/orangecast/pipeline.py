"""Dataset discovery and pipeline assembly shared by the CLI and tests.

A dataset is a directory of plainly named files (forecasts.csv,
weather.csv[.gz], yields.csv, prices.csv, calendar.txt, optional
temple.csv and config.json). Artifacts produced from it are also plain
files, so every stage can be rerun or inspected in isolation.
"""

from __future__ import annotations

import importlib.resources
import json
import logging
from dataclasses import dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .clustering import (
    ClusterAssignment,
    aggregate_cluster_features,
    cluster_counties,
    load_county_yields,
)
from .errors import ConfigError, ValidationError
from .features import (
    DEFAULT_ET0_MM_DAY,
    FeatureParams,
    PredictorMatrix,
    StationSeries,
    build_station_series,
    compute_feature_rows,
    normalize_scope,
)
from .forecast import ErrorDistribution, Tilt, bootstrap_distribution
from .ingest import (
    EventCalendar,
    OrangeType,
    PriceBar,
    SeasonRecord,
    load_event_calendar,
    load_forecast_history,
    load_price_history,
    load_weather_history,
    select_station_per_county,
)
from .localreg import LocalPolynomialRegression

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "Dataset",
    "load_dataset",
    "load_prices",
    "default_data_dir",
    "build_matrix",
    "error_series",
    "fit_from_matrix",
    "forecast_distribution",
    "announcement_dates",
]

FORECASTS_FILE = "forecasts.csv"
TEMPLE_FILE = "temple.csv"
WEATHER_FILES = ("weather.csv.gz", "weather.csv")
YIELDS_FILE = "yields.csv"
PRICES_FILE = "prices.csv"
CALENDAR_FILE = "calendar.txt"
CONFIG_FILE = "config.json"

SEASONS_ARTIFACT = "seasons.csv"
STATIONS_ARTIFACT = "stations.csv"
CLUSTERS_ARTIFACT = "clusters.csv"


def features_filename(phase: str) -> str:
    return f"features_{phase}.csv"


def screening_filename(orange_type: OrangeType, phase: str) -> str:
    return f"screening_{orange_type.key}_{phase}.csv"


def event_fit_filename(orange_type: OrangeType) -> str:
    return f"event_fit_{orange_type.key}.json"


def model_filename(orange_type: OrangeType, label: str) -> str:
    return f"model_{orange_type.key}_{label}.json"


def gcv_filename(orange_type: OrangeType, phase: str) -> str:
    return f"gcv_{orange_type.key}_{phase}.csv"


def distribution_filename(orange_type: OrangeType, season_year: int) -> str:
    return f"distribution_{orange_type.key}_{season_year}.json"


def payoffs_filename(orange_type: OrangeType) -> str:
    return f"payoffs_{orange_type.key}.json"


def recommendation_filename(orange_type: OrangeType, season_year: int) -> str:
    return f"recommendation_{orange_type.key}_{season_year}.json"


@dataclass
class PipelineConfig:
    """Tunable parameters for every pipeline stage, overridable from a
    flat config.json and again from command-line flags."""

    data_dir: str | None = None
    out_dir: str = "artifacts"
    k: int = 4
    cluster_seed: int = 0
    restarts: int = 10
    coverage_floor: float = 0.9
    kc: float = 0.9
    et0_mm_day: dict = field(default_factory=lambda: dict(DEFAULT_ET0_MM_DAY))
    q75_min_years: int = 5
    row_missing_limit: float = 0.3
    b: int = 1000
    seed: int = 0
    tau: float = 5.0
    p_high: float = 0.9
    p_low: float = 0.1
    contract_lbs: int = 15000
    announcement_month: int = 10
    announcement_day: int = 12
    host: str = "127.0.0.1"
    port: int = 8701

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(
                f"{path}: unknown config keys: " + ", ".join(unknown)
            )
        if "et0_mm_day" in doc:
            try:
                doc["et0_mm_day"] = {
                    int(k): float(v) for k, v in doc["et0_mm_day"].items()
                }
            except (TypeError, ValueError, AttributeError):
                raise ConfigError(
                    f"{path}: et0_mm_day must map month numbers to mm/day"
                ) from None
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def feature_params(self) -> FeatureParams:
        return FeatureParams(
            coverage_floor=self.coverage_floor,
            kc=self.kc,
            et0_mm_day=dict(self.et0_mm_day),
            q75_min_years=self.q75_min_years,
            row_missing_limit=self.row_missing_limit,
        )

    def announcement_date(self, season_year: int) -> date:
        return date(
            season_year - 1, self.announcement_month, self.announcement_day
        )


def default_data_dir() -> Path:
    """The reference dataset shipped inside the package."""
    root = importlib.resources.files("orangecast").joinpath(
        "fixtures/reference"
    )
    path = Path(str(root))
    if not path.is_dir():
        raise ConfigError(
            "no --data-dir given and the packaged reference dataset is "
            "not available"
        )
    return path


def _require(root: Path, name: str) -> Path:
    path = root / name
    if not path.exists():
        raise FileNotFoundError(f"missing dataset file: {path}")
    return path


@dataclass
class Dataset:
    """All inputs of one dataset directory, loaded and station-selected."""

    root: Path
    seasons: list[SeasonRecord]
    calendar: EventCalendar
    yields: dict[str, dict[int, float]]
    station_by_county: dict[str, str]
    series_by_scope: dict[str, StationSeries]

    def season_years(self) -> list[int]:
        return sorted({r.season_year for r in self.seasons})


def load_dataset(root) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    forecasts_path = _require(root, FORECASTS_FILE)
    temple_path = root / TEMPLE_FILE
    weather_path = None
    for name in WEATHER_FILES:
        if (root / name).exists():
            weather_path = root / name
            break
    if weather_path is None:
        raise FileNotFoundError(
            f"missing dataset file: {root / WEATHER_FILES[0]} (or .csv)"
        )
    yields_path = _require(root, YIELDS_FILE)
    calendar = load_event_calendar(_require(root, CALENDAR_FILE))

    seasons = load_forecast_history(
        forecasts_path, temple_path if temple_path.exists() else None
    )
    weather = load_weather_history(weather_path)
    yields = load_county_yields(yields_path)

    counties = list(yields)
    station_by_county = select_station_per_county(weather, counties)
    series_all = build_station_series(
        weather, station_ids=set(station_by_county.values())
    )
    series_by_scope: dict[str, StationSeries] = {}
    for county in counties:
        scope = normalize_scope(county)
        if scope in series_by_scope:
            raise ValidationError(
                f"county names {county!r} and another collapse to the same "
                f"scope {scope!r}"
            )
        series_by_scope[scope] = series_all[station_by_county[county]]
    logger.info(
        "dataset %s: %d season rows, %d counties, %d weather records",
        root,
        len(seasons),
        len(counties),
        len(weather),
    )
    return Dataset(
        root=root,
        seasons=seasons,
        calendar=calendar,
        yields=yields,
        station_by_county=station_by_county,
        series_by_scope=series_by_scope,
    )


def load_prices(root) -> list[PriceBar]:
    return load_price_history(_require(Path(root), PRICES_FILE))


def scoped_assignment(assignment: ClusterAssignment) -> ClusterAssignment:
    """The same cluster assignment keyed by normalized scope names."""
    mapping: dict[str, str] = {}
    for county, cid in assignment.assignment.items():
        scope = normalize_scope(county)
        if scope in mapping:
            raise ValidationError(
                f"two counties collapse to scope {scope!r}"
            )
        mapping[scope] = cid
    return ClusterAssignment.from_mapping(mapping)


def merge_matrices(a: PredictorMatrix, b: PredictorMatrix) -> PredictorMatrix:
    """Union of columns over identical season rows (first matrix wins on
    duplicate column names)."""
    if a.years != b.years or a.phase != b.phase:
        raise ValidationError("matrices cover different seasons or phases")
    extra = [c for c in b.columns if c not in a.columns]
    idx = [b.columns.index(c) for c in extra]
    merged = PredictorMatrix(
        a.years,
        list(a.columns) + extra,
        np.hstack([a.values, b.values[:, idx]]),
        np.hstack([a.flags, b.flags[:, idx]]),
        a.phase,
    )
    merged.dropped_years = list(a.dropped_years)
    return merged


def build_matrix(
    ds: Dataset,
    phase: str,
    config: PipelineConfig,
    years: Sequence[int] | None = None,
) -> tuple[PredictorMatrix, ClusterAssignment]:
    """County features, cluster aggregates, and indicators in one matrix.

    Columns are the three event indicators, the per-county climate
    features ({Scope}_{Feature}), and the cluster means ({Ck}_{Feature}).
    """
    years = sorted(years) if years is not None else ds.season_years()
    rows = compute_feature_rows(
        years, ds.series_by_scope, phase, config.feature_params()
    )
    county_matrix = PredictorMatrix.from_rows(
        rows, ds.calendar, config.row_missing_limit
    )
    assignment = cluster_counties(
        ds.yields,
        k=config.k,
        seed=config.cluster_seed,
        restarts=config.restarts,
    )
    cluster_matrix = aggregate_cluster_features(
        county_matrix, scoped_assignment(assignment)
    )
    return merge_matrices(county_matrix, cluster_matrix), assignment


def error_series(
    seasons: Sequence[SeasonRecord], orange_type: OrangeType
) -> dict[int, float]:
    return {
        r.season_year: r.pct_error
        for r in seasons
        if r.orange_type is orange_type
    }


def fit_from_matrix(
    matrix: PredictorMatrix,
    errors: Mapping[int, float],
    predictors: Sequence[str],
    alpha: float,
    degree: int = 1,
    exclude: Sequence[int] = (),
) -> tuple[LocalPolynomialRegression, list[int]]:
    """Fit a local model on the seasons with observed error and complete
    predictor rows, excluding the listed seasons."""
    missing = [c for c in predictors if c not in matrix.columns]
    if missing:
        raise ValidationError(
            "predictor not in the matrix: " + ", ".join(missing)
        )
    complete = matrix.complete_rows(predictors)
    years_used = [
        y
        for i, y in enumerate(matrix.years)
        if complete[i] and y in errors and y not in exclude
    ]
    skipped = [
        y
        for i, y in enumerate(matrix.years)
        if not complete[i] and y in errors and y not in exclude
    ]
    if skipped:
        logger.info(
            "seasons without complete predictors skipped from training: %s",
            ", ".join(str(y) for y in skipped),
        )
    if not years_used:
        raise ValidationError(
            "no training seasons with observed error and complete predictors"
        )
    X = np.array([matrix.row(y, predictors) for y in years_used])
    y = np.array([errors[yr] for yr in years_used])
    model = LocalPolynomialRegression(alpha=alpha, degree=degree).fit(
        X, y, columns=predictors
    )
    return model, years_used


def forecast_distribution(
    matrix: PredictorMatrix,
    errors: Mapping[int, float],
    predictors: Sequence[str],
    alpha: float,
    season_year: int,
    orange_type: OrangeType,
    degree: int = 1,
    b: int = 1000,
    seed: int = 0,
    source_model: str = "",
    tilt: str | Tilt = Tilt.NO_TILT,
) -> ErrorDistribution:
    """Out-of-sample error distribution for one target season.

    The model trains on every other season; the target contributes only
    its predictor row.
    """
    if season_year not in matrix.years:
        dropped = dict(matrix.dropped_years)
        if season_year in dropped:
            raise ValidationError(
                f"season {season_year} was excluded from the matrix: "
                f"{dropped[season_year]}"
            )
        raise ValidationError(
            f"season {season_year} is not covered by the feature matrix"
        )
    x0 = matrix.row(season_year, predictors)
    bad = [p for p, v in zip(predictors, x0) if not np.isfinite(v)]
    if bad:
        raise ValidationError(
            f"season {season_year} is missing predictors: " + ", ".join(bad)
        )
    model, years_used = fit_from_matrix(
        matrix, errors, predictors, alpha, degree, exclude=(season_year,)
    )
    logger.info(
        "forecasting %s %d from %d training seasons (%d..%d)",
        orange_type.value,
        season_year,
        len(years_used),
        min(years_used),
        max(years_used),
    )
    return bootstrap_distribution(
        model,
        x0,
        b=b,
        seed=seed,
        source_model=source_model,
        season_year=season_year,
        orange_type=orange_type.value,
        tilt=tilt,
    )


def announcement_dates(
    seasons: Sequence[SeasonRecord],
    orange_type: OrangeType,
    config: PipelineConfig,
) -> list[date]:
    return sorted(
        config.announcement_date(r.season_year)
        for r in seasons
        if r.orange_type is orange_type
    )
