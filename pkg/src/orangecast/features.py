"""Climate predictors computed from daily station weather.

Each predictor is a scalar per (season, scope) where a scope is a county
(one selected station) or, after aggregation, a cluster of counties.
Every value carries a quality flag:

* ``ok``       computed from observed days meeting the coverage floor
* ``imputed``  computed with missing days substituted (water deficit only;
               cluster aggregation also imputes from the member mean)
* ``missing``  not computable (coverage below floor, empty history, ...)

Monthly cold features use season-relative windows. For a season credited
to July of year ``y`` (forecast announced October ``y-1``), the
pre-forecast winter is November/December of ``y-2`` and January..March of
``y-1``; the post-forecast winter is November/December of ``y-1`` and
January..March of ``y``. Rainfall and drought features exist only in the
pre-forecast phase: February..April and May of ``y-1`` for the exceedance
counts, June..August of ``y-1`` for summer rainfall and water deficit.
"""

from __future__ import annotations

import calendar as _cal
import csv
import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .ingest import DailyWeatherRecord, EventCalendar

logger = logging.getLogger(__name__)

__all__ = [
    "FeatureValue",
    "FeatureParams",
    "StationSeries",
    "FeatureRow",
    "PredictorMatrix",
    "FLAG_OK",
    "FLAG_IMPUTED",
    "FLAG_MISSING",
    "PHASE_PRE",
    "PHASE_POST",
    "INDICATOR_COLUMNS",
    "FEATURE_KEYS_PRE",
    "FEATURE_KEYS_POST",
    "normalize_scope",
    "count_days_below",
    "max_cold_run",
    "rainfall_exceedance_days",
    "window_precip_total",
    "summer_deficit",
    "build_station_series",
    "compute_station_features",
    "compute_feature_rows",
    "write_feature_table",
    "read_feature_table",
]

FLAG_OK = "ok"
FLAG_IMPUTED = "imputed"
FLAG_MISSING = "missing"

PHASE_PRE = "pre"
PHASE_POST = "post"

INDICATOR_COLUMNS = ("Freezes", "Hurricanes", "Cg")

_COLD_MONTHS = (("Nov", 11), ("Dec", 12), ("Jan", 1), ("Feb", 2), ("Mar", 3))

FEATURE_KEYS_PRE: tuple[str, ...] = tuple(
    f"{mon}{suffix}" for mon, _ in _COLD_MONTHS for suffix in ("1c", "4c", "c")
) + ("FMAQ75", "MayQ75", "JJA_precip", "JJA_deficit")

FEATURE_KEYS_POST: tuple[str, ...] = tuple(
    f"{mon}{suffix}" for mon, _ in _COLD_MONTHS for suffix in ("1c", "4c", "c")
)

# Reference evapotranspiration defaults (mm/day) for the summer deficit;
# override through FeatureParams.et0_mm_day for site-specific tables.
DEFAULT_ET0_MM_DAY = {6: 5.2, 7: 5.1, 8: 4.9}

_scope_re = re.compile(r"[^0-9A-Za-z]+")


def normalize_scope(name: str) -> str:
    """Canonical scope token: drop everything but letters and digits.

    ``"St. Lucie" -> "StLucie"``, ``"De Soto" -> "DeSoto"``.
    """
    parts = [p for p in _scope_re.split(name) if p]
    if not parts:
        raise ValidationError(f"unusable scope name {name!r}")
    return "".join(p[0].upper() + p[1:] for p in parts)


@dataclass(frozen=True)
class FeatureValue:
    value: float | None
    flag: str
    coverage: float = 1.0

    @property
    def is_missing(self) -> bool:
        return self.flag == FLAG_MISSING


@dataclass(frozen=True)
class FeatureParams:
    """Knobs shared by the feature computations."""

    coverage_floor: float = 0.9
    kc: float = 0.9
    et0_mm_day: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_ET0_MM_DAY)
    )
    q75_min_years: int = 5
    row_missing_limit: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.coverage_floor <= 1.0):
            raise ValidationError("coverage_floor must be in (0, 1]")
        if self.kc <= 0:
            raise ValidationError("kc must be positive")


def _month_window(year: int, month: int) -> tuple[date, date]:
    last = _cal.monthrange(year, month)[1]
    return date(year, month, 1), date(year, month, last)


def _iter_days(window: tuple[date, date]):
    start, end = window
    d = start
    one = timedelta(days=1)
    while d <= end:
        yield d
        d += one


def _window_days(window: tuple[date, date]) -> int:
    start, end = window
    if end < start:
        raise ValidationError("window ends before it starts")
    return (end - start).days + 1


def count_days_below(
    values: Mapping[date, float],
    window: tuple[date, date],
    threshold_c: float,
    coverage_floor: float = 0.9,
) -> FeatureValue:
    """Days in the window with value strictly below the threshold.

    Missing days are excluded from the count; when observed coverage drops
    below the floor the feature is flagged missing instead of guessed.
    """
    total = _window_days(window)
    observed = [values[d] for d in _iter_days(window) if values.get(d) is not None]
    coverage = len(observed) / total
    if coverage < coverage_floor:
        return FeatureValue(None, FLAG_MISSING, coverage)
    count = sum(1 for v in observed if v < threshold_c)
    return FeatureValue(float(count), FLAG_OK, coverage)


def max_cold_run(
    mean_temps: Mapping[date, float],
    window: tuple[date, date],
    threshold_c: float = 7.0,
    coverage_floor: float = 0.9,
) -> FeatureValue:
    """Longest run of consecutive days with mean temperature below the
    threshold. A missing day breaks the run."""
    total = _window_days(window)
    best = 0
    run = 0
    n_obs = 0
    for d in _iter_days(window):
        v = mean_temps.get(d)
        if v is None:
            run = 0
            continue
        n_obs += 1
        if v < threshold_c:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    coverage = n_obs / total
    if coverage < coverage_floor:
        return FeatureValue(None, FLAG_MISSING, coverage)
    return FeatureValue(float(best), FLAG_OK, coverage)


def _percentile75(values: Sequence[float]) -> float:
    # linear interpolation between order statistics, numpy default
    return float(np.percentile(np.asarray(values, dtype=float), 75))


def rainfall_exceedance_days(
    precip: Mapping[date, float],
    target_window: tuple[date, date],
    history_windows: Sequence[tuple[date, date]],
    coverage_floor: float = 0.9,
    min_years: int = 5,
) -> FeatureValue:
    """Days in the target window with rainfall strictly above the station's
    historical 75th percentile for that window-of-year.

    The percentile pools every observed day across the history windows,
    zeros included. If that percentile is zero (dry climates), it is
    recomputed over positive amounts only; an all-zero history makes the
    feature missing.
    """
    total = _window_days(target_window)
    target_obs = [
        precip[d] for d in _iter_days(target_window) if precip.get(d) is not None
    ]
    coverage = len(target_obs) / total
    if coverage < coverage_floor:
        return FeatureValue(None, FLAG_MISSING, coverage)

    pool: list[float] = []
    years_with_data = 0
    for w in history_windows:
        vals = [precip[d] for d in _iter_days(w) if precip.get(d) is not None]
        if vals:
            years_with_data += 1
            pool.extend(vals)
    if years_with_data < min_years or not pool:
        return FeatureValue(None, FLAG_MISSING, coverage)

    q75 = _percentile75(pool)
    if q75 == 0.0:
        positives = [v for v in pool if v > 0]
        if not positives:
            return FeatureValue(None, FLAG_MISSING, coverage)
        q75 = _percentile75(positives)

    count = sum(1 for v in target_obs if v > q75)
    return FeatureValue(float(count), FLAG_OK, coverage)


def window_precip_total(
    precip: Mapping[date, float],
    window: tuple[date, date],
    coverage_floor: float = 0.9,
) -> FeatureValue:
    """Total rainfall over the window from observed days."""
    total = _window_days(window)
    observed = [precip[d] for d in _iter_days(window) if precip.get(d) is not None]
    coverage = len(observed) / total
    if coverage < coverage_floor:
        return FeatureValue(None, FLAG_MISSING, coverage)
    return FeatureValue(float(sum(observed)), FLAG_OK, coverage)


def summer_deficit(
    precip: Mapping[date, float],
    window: tuple[date, date],
    kc: float = 0.9,
    et0_mm_day: Mapping[int, float] | None = None,
) -> FeatureValue:
    """Accumulated daily water deficit max(0, kc*et0 - rain) over the window.

    Days with missing rainfall contribute the full crop demand (rain
    treated as zero) and mark the value imputed rather than missing.
    """
    if kc <= 0:
        raise ValidationError("kc must be positive")
    et0 = DEFAULT_ET0_MM_DAY if et0_mm_day is None else et0_mm_day
    total = 0.0
    n_obs = 0
    n_days = 0
    for d in _iter_days(window):
        n_days += 1
        if d.month not in et0:
            raise ConfigError(f"et0 table has no entry for month {d.month}")
        demand = kc * float(et0[d.month])
        rain = precip.get(d)
        if rain is None:
            total += demand
        else:
            n_obs += 1
            total += max(0.0, demand - rain)
    coverage = n_obs / n_days if n_days else 0.0
    flag = FLAG_OK if n_obs == n_days else FLAG_IMPUTED
    return FeatureValue(total, flag, coverage)


class StationSeries:
    """Daily observations of one station keyed by date."""

    __slots__ = ("station_id", "county", "tmin", "tmax", "precip", "_mean")

    def __init__(self, station_id: str, county: str):
        self.station_id = station_id
        self.county = county
        self.tmin: dict[date, float] = {}
        self.tmax: dict[date, float] = {}
        self.precip: dict[date, float] = {}
        self._mean: dict[date, float] | None = None

    def add(self, rec: DailyWeatherRecord) -> None:
        if rec.tmin_c is not None:
            self.tmin[rec.date] = rec.tmin_c
        if rec.tmax_c is not None:
            self.tmax[rec.date] = rec.tmax_c
        if rec.precip_mm is not None:
            self.precip[rec.date] = rec.precip_mm
        self._mean = None

    def mean_temp(self) -> dict[date, float]:
        """Daily mean temperature where both extremes are observed."""
        if self._mean is None:
            self._mean = {
                d: (v + self.tmax[d]) / 2.0
                for d, v in self.tmin.items()
                if d in self.tmax
            }
        return self._mean

    def precip_years(self) -> list[int]:
        return sorted({d.year for d in self.precip})


def build_station_series(
    records: Iterable[DailyWeatherRecord],
    station_ids: Iterable[str] | None = None,
) -> dict[str, StationSeries]:
    """Group raw records into per-station series.

    ``station_ids`` restricts the result (selection output); duplicate
    (station, date) observations keep the last value seen.
    """
    wanted = set(station_ids) if station_ids is not None else None
    out: dict[str, StationSeries] = {}
    for rec in records:
        if wanted is not None and rec.station_id not in wanted:
            continue
        series = out.get(rec.station_id)
        if series is None:
            series = out[rec.station_id] = StationSeries(rec.station_id, rec.county)
        series.add(rec)
    if wanted is not None:
        absent = wanted - set(out)
        if absent:
            raise ValidationError(
                "no records for station: " + ", ".join(sorted(absent))
            )
    return out


def _cold_month_year(season_year: int, month: int, phase: str) -> int:
    announce = season_year - 1
    if phase == PHASE_PRE:
        return announce - 1 if month >= 11 else announce
    if phase == PHASE_POST:
        return announce if month >= 11 else season_year
    raise ValidationError(f"unknown phase {phase!r}")


def compute_station_features(
    series: StationSeries,
    season_year: int,
    phase: str,
    params: FeatureParams | None = None,
) -> dict[str, FeatureValue]:
    """All features of one station for one season and phase."""
    p = params or FeatureParams()
    floor = p.coverage_floor
    out: dict[str, FeatureValue] = {}
    mean_temp = series.mean_temp()

    for mon, month in _COLD_MONTHS:
        w = _month_window(_cold_month_year(season_year, month, phase), month)
        out[f"{mon}1c"] = count_days_below(series.tmin, w, 1.0, floor)
        out[f"{mon}4c"] = count_days_below(series.tmin, w, 4.0, floor)
        out[f"{mon}c"] = max_cold_run(mean_temp, w, 7.0, floor)

    if phase == PHASE_POST:
        return out

    announce = season_year - 1
    fma = (date(announce, 2, 1), _month_window(announce, 4)[1])
    may = _month_window(announce, 5)
    jja = (date(announce, 6, 1), _month_window(announce, 8)[1])

    years = series.precip_years()
    out["FMAQ75"] = rainfall_exceedance_days(
        series.precip,
        fma,
        [(date(y, 2, 1), _month_window(y, 4)[1]) for y in years],
        floor,
        p.q75_min_years,
    )
    out["MayQ75"] = rainfall_exceedance_days(
        series.precip,
        may,
        [_month_window(y, 5) for y in years],
        floor,
        p.q75_min_years,
    )
    out["JJA_precip"] = window_precip_total(series.precip, jja, floor)
    out["JJA_deficit"] = summer_deficit(series.precip, jja, p.kc, p.et0_mm_day)
    return out


@dataclass
class FeatureRow:
    """Feature values of one (season, scope, phase) triple."""

    season_year: int
    scope: str
    phase: str
    values: dict[str, float | None]
    flags: dict[str, str]


def feature_keys(phase: str) -> tuple[str, ...]:
    if phase == PHASE_PRE:
        return FEATURE_KEYS_PRE
    if phase == PHASE_POST:
        return FEATURE_KEYS_POST
    raise ValidationError(f"unknown phase {phase!r}")


def compute_feature_rows(
    years: Iterable[int],
    series_by_scope: Mapping[str, StationSeries],
    phase: str,
    params: FeatureParams | None = None,
) -> list[FeatureRow]:
    """Features for every (season, scope) pair, scopes in mapping order."""
    keys = feature_keys(phase)
    rows: list[FeatureRow] = []
    for year in years:
        for scope, series in series_by_scope.items():
            feats = compute_station_features(series, year, phase, params)
            rows.append(
                FeatureRow(
                    season_year=year,
                    scope=scope,
                    phase=phase,
                    values={k: feats[k].value for k in keys},
                    flags={k: feats[k].flag for k in keys},
                )
            )
    return rows


def _format_cell(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_feature_table(rows: Sequence[FeatureRow], path) -> None:
    """Write rows plus a sibling ``<name>.flags.csv`` with quality flags."""
    if not rows:
        raise ValidationError("no feature rows to write")
    phase = rows[0].phase
    keys = feature_keys(phase)
    header = ["season_year", "scope", "phase", *keys]
    path = Path(path)
    flags_path = path.with_suffix(".flags.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            if r.phase != phase:
                raise ValidationError("mixed phases in one feature table")
            w.writerow(
                [r.season_year, r.scope, r.phase]
                + [_format_cell(r.values.get(k)) for k in keys]
            )
    with open(flags_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(
                [r.season_year, r.scope, r.phase]
                + [r.flags.get(k, FLAG_MISSING) for k in keys]
            )


def read_feature_table(path) -> list[FeatureRow]:
    """Inverse of :func:`write_feature_table` (flags sidecar optional)."""
    path = Path(path)
    rows: list[FeatureRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path, line=1) from None
        if header[:3] != ["season_year", "scope", "phase"]:
            raise ParseError(
                "expected header starting season_year,scope,phase", path=path, line=1
            )
        keys = header[3:]
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}",
                    path=path,
                    line=line_no,
                )
            try:
                year = int(row[0])
            except ValueError:
                raise ParseError(
                    f"bad season_year {row[0]!r}", path=path, line=line_no
                ) from None
            values: dict[str, float | None] = {}
            for k, cell in zip(keys, row[3:]):
                if cell == "":
                    values[k] = None
                else:
                    try:
                        values[k] = float(cell)
                    except ValueError:
                        raise ParseError(
                            f"bad value {cell!r} for {k}", path=path, line=line_no
                        ) from None
            rows.append(FeatureRow(year, row[1], row[2], values, {}))

    flags_path = path.with_suffix(".flags.csv")
    if flags_path.exists():
        with open(flags_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            fheader = next(reader)
            fkeys = fheader[3:]
            for r, row in zip(rows, reader):
                r.flags = dict(zip(fkeys, row[3:]))
    else:
        for r in rows:
            r.flags = {
                k: (FLAG_MISSING if v is None else FLAG_OK)
                for k, v in r.values.items()
            }
    return rows


class PredictorMatrix:
    """Season-by-predictor design data: indicator columns plus scoped
    climate columns named ``<scope>_<feature>``.

    ``values`` is a float array with NaN marking missing cells, ``flags``
    a parallel array of quality strings. Rows are seasons in ascending
    year order.
    """

    def __init__(
        self,
        years: Sequence[int],
        columns: Sequence[str],
        values: np.ndarray,
        flags: np.ndarray,
        phase: str,
    ):
        self.years = list(years)
        if len(set(self.years)) != len(self.years):
            raise ValidationError("duplicate season years in predictor matrix")
        self.columns = list(columns)
        if len(set(self.columns)) != len(self.columns):
            raise ValidationError("duplicate columns in predictor matrix")
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.years), len(self.columns)):
            raise ValidationError("predictor matrix shape mismatch")
        self.values = values
        self.flags = np.asarray(flags, dtype=object)
        if self.flags.shape != values.shape:
            raise ValidationError("predictor flag shape mismatch")
        self.phase = phase
        self.dropped_years: list[tuple[int, str]] = []
        for name in INDICATOR_COLUMNS:
            if name in self.columns:
                col = values[:, self.columns.index(name)]
                if not np.all(np.isin(col[~np.isnan(col)], (0.0, 1.0))):
                    raise ValidationError(f"indicator column {name} is not 0/1")

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[FeatureRow],
        calendar: EventCalendar,
        row_missing_limit: float = 0.3,
    ) -> "PredictorMatrix":
        """Pivot per-scope feature rows into a wide matrix and prepend the
        event indicator columns.

        Seasons missing more than ``row_missing_limit`` of their climate
        cells are excluded (recorded in ``dropped_years``).
        """
        if not rows:
            raise ValidationError("no feature rows")
        phase = rows[0].phase
        scopes: list[str] = []
        keys_by_scope: dict[str, list[str]] = {}
        cells: dict[tuple[int, str], tuple[float | None, str]] = {}
        years: list[int] = []
        for r in rows:
            if r.phase != phase:
                raise ValidationError("mixed phases in feature rows")
            if r.scope not in keys_by_scope:
                scopes.append(r.scope)
                keys_by_scope[r.scope] = list(r.values.keys())
            if r.season_year not in years:
                years.append(r.season_year)
            for k, v in r.values.items():
                cells[(r.season_year, f"{r.scope}_{k}")] = (
                    v,
                    r.flags.get(k, FLAG_MISSING if v is None else FLAG_OK),
                )
        years.sort()
        climate_cols = [
            f"{scope}_{k}" for scope in scopes for k in keys_by_scope[scope]
        ]
        columns = list(INDICATOR_COLUMNS) + climate_cols

        keep_years: list[int] = []
        dropped: list[tuple[int, str]] = []
        for y in years:
            n_missing = sum(
                1
                for c in climate_cols
                if cells.get((y, c), (None, FLAG_MISSING))[0] is None
            )
            frac = n_missing / len(climate_cols) if climate_cols else 0.0
            if frac > row_missing_limit:
                reason = (
                    f"{n_missing}/{len(climate_cols)} climate cells missing "
                    f"({frac:.0%} > {row_missing_limit:.0%})"
                )
                logger.warning("season %d excluded: %s", y, reason)
                dropped.append((y, reason))
            else:
                keep_years.append(y)

        values = np.full((len(keep_years), len(columns)), np.nan)
        flags = np.full((len(keep_years), len(columns)), FLAG_MISSING, dtype=object)
        for i, y in enumerate(keep_years):
            ind = calendar.indicators(y)
            for j, name in enumerate(INDICATOR_COLUMNS):
                values[i, j] = float(ind[name])
                flags[i, j] = FLAG_OK
            for c in climate_cols:
                v, fl = cells.get((y, c), (None, FLAG_MISSING))
                j = columns.index(c)
                if v is not None:
                    values[i, j] = v
                flags[i, j] = fl

        m = cls(keep_years, columns, values, flags, phase)
        m.dropped_years = dropped
        return m

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ValidationError(f"unknown predictor column {name!r}")
        return self.values[:, self.columns.index(name)]

    def flag_column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ValidationError(f"unknown predictor column {name!r}")
        return self.flags[:, self.columns.index(name)]

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(year)
        except ValueError:
            raise ValidationError(f"season {year} not in predictor matrix") from None

    def row(self, year: int, columns: Sequence[str]) -> np.ndarray:
        i = self.year_index(year)
        return np.array([self.values[i, self.columns.index(c)] for c in columns])

    def complete_rows(self, columns: Sequence[str]) -> np.ndarray:
        """Boolean mask of seasons with every named column observed."""
        idx = [self.columns.index(c) for c in columns]
        return ~np.isnan(self.values[:, idx]).any(axis=1)

    def climate_columns(self) -> list[str]:
        return [c for c in self.columns if c not in INDICATOR_COLUMNS]

    def scope_of(self, column: str) -> str | None:
        if column in INDICATOR_COLUMNS:
            return None
        scope, _, _ = column.partition("_")
        return scope
