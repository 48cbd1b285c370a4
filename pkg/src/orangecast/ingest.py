"""Loading and validation of forecast, weather, price, and event-calendar files.

All loaders accept plain CSV or gzip-compressed CSV (``.gz`` suffix),
raise :class:`~orangecast.errors.ParseError` with the offending line
number on malformed content, and :class:`~orangecast.errors.ValidationError`
on semantically invalid values.
"""

from __future__ import annotations

import csv
import gzip
import io
import logging
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

__all__ = [
    "OrangeType",
    "SeasonRecord",
    "DailyWeatherRecord",
    "PriceBar",
    "EventCalendar",
    "percent_error",
    "load_forecast_history",
    "write_forecast_history",
    "load_weather_history",
    "select_station_per_county",
    "load_price_history",
    "load_event_calendar",
]


class OrangeType(str, Enum):
    """Crop split used by the October forecast."""

    VALENCIA = "Valencia"
    NON_VALENCIA = "NonValencia"

    @property
    def key(self) -> str:
        """Lowercase token used in artifact filenames and query strings."""
        return "valencia" if self is OrangeType.VALENCIA else "nonvalencia"

    @classmethod
    def from_token(cls, token: str) -> "OrangeType":
        t = token.strip().lower().replace("_", "").replace("-", "")
        if t == "valencia":
            return cls.VALENCIA
        if t in ("nonvalencia", "earlymid"):
            return cls.NON_VALENCIA
        raise ValidationError(f"unknown orange type {token!r}")


def percent_error(forecast_kboxes: float, production_kboxes: float) -> float:
    """Forecast error in percent of realized production.

    Positive values mean the October forecast overestimated the season's
    production; the error is measured against production, not forecast.
    """
    if production_kboxes <= 0:
        raise ValidationError(
            f"production must be positive, got {production_kboxes!r}"
        )
    return 100.0 * (forecast_kboxes - production_kboxes) / production_kboxes


@dataclass(frozen=True)
class SeasonRecord:
    """One season's October forecast and realized production, in thousand boxes.

    ``season_year`` is the calendar year the season's production is
    credited to (the July of the season); the forecast itself is issued
    in October of ``season_year - 1``.
    """

    season_year: int
    orange_type: OrangeType
    forecast_kboxes: float
    production_kboxes: float
    pct_error: float = field(default=None)  # derived, do not pass

    def __post_init__(self):
        if self.production_kboxes <= 0:
            raise ValidationError(
                f"season {self.season_year}: production must be positive, "
                f"got {self.production_kboxes!r}"
            )
        if self.pct_error is None:
            object.__setattr__(
                self,
                "pct_error",
                percent_error(self.forecast_kboxes, self.production_kboxes),
            )


@dataclass(frozen=True)
class DailyWeatherRecord:
    """One station-day of raw weather. Missing fields are None."""

    station_id: str
    county: str
    date: date
    tmin_c: float | None
    tmax_c: float | None
    precip_mm: float | None

    def __post_init__(self):
        if (
            self.tmin_c is not None
            and self.tmax_c is not None
            and self.tmin_c > self.tmax_c
        ):
            raise ValidationError(
                f"station {self.station_id} {self.date}: tmin {self.tmin_c} "
                f"exceeds tmax {self.tmax_c}"
            )
        if self.precip_mm is not None and self.precip_mm < 0:
            raise ValidationError(
                f"station {self.station_id} {self.date}: negative precipitation"
            )


@dataclass(frozen=True)
class PriceBar:
    """One futures close, in cents per pound of solids."""

    date: date
    contract: str
    close_cents_per_lb: float

    def __post_init__(self):
        if self.close_cents_per_lb <= 0:
            raise ValidationError(
                f"{self.date} {self.contract}: close must be positive"
            )


@dataclass(frozen=True)
class EventCalendar:
    """Years of exogenous production shocks driving the 0/1 indicators."""

    freeze_years: frozenset[int]
    hurricane_years: frozenset[int]
    cg_from_year: int

    def freezes(self, season_year: int) -> int:
        return 1 if season_year in self.freeze_years else 0

    def hurricanes(self, season_year: int) -> int:
        return 1 if season_year in self.hurricane_years else 0

    def cg(self, season_year: int) -> int:
        # disease pressure is persistent once established, hence a step
        return 1 if season_year >= self.cg_from_year else 0

    def indicators(self, season_year: int) -> dict[str, int]:
        return {
            "Freezes": self.freezes(season_year),
            "Hurricanes": self.hurricanes(season_year),
            "Cg": self.cg(season_year),
        }


def _open_text(path) -> io.TextIOBase:
    p = Path(path)
    if p.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(p, "rb"), encoding="utf-8", newline="")
    return open(p, "r", encoding="utf-8", newline="")


def _read_csv_rows(path, expected_header: Sequence[str]):
    """Yield (line_number, row) after validating the header row."""
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path, line=1) from None
        header = [h.strip() for h in header]
        if header != list(expected_header):
            raise ParseError(
                f"expected header {','.join(expected_header)!r}, got "
                f"{','.join(header)!r}",
                path=path,
                line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected_header):
                raise ParseError(
                    f"expected {len(expected_header)} fields, got {len(row)}",
                    path=path,
                    line=line_no,
                )
            yield line_no, [c.strip() for c in row]


def _parse_float(token: str, what: str, path, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", path=path, line=line_no) from None


def _parse_int(token: str, what: str, path, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", path=path, line=line_no) from None


def _parse_optional_float(token: str, what: str, path, line_no: int) -> float | None:
    if token == "":
        return None
    return _parse_float(token, what, path, line_no)


FORECAST_HEADER = ("season_year", "orange_type", "forecast_kboxes", "production_kboxes")
TEMPLE_HEADER = ("season_year", "forecast_kboxes", "production_kboxes")
WEATHER_HEADER = ("station_id", "county", "date", "tmin_c", "tmax_c", "precip_mm")
PRICE_HEADER = ("date", "contract", "close_cents_per_lb")

# Temple oranges were folded into the early-mid (non-Valencia) total by the
# reporting convention change; seasons through 2005 need the add-back.
TEMPLE_LAST_SEASON = 2005
TEMPLE_FIRST_SEASON = 1977


def _load_temple_totals(path) -> dict[int, tuple[float, float]]:
    totals: dict[int, tuple[float, float]] = {}
    for line_no, row in _read_csv_rows(path, TEMPLE_HEADER):
        year = _parse_int(row[0], "season_year", path, line_no)
        f = _parse_float(row[1], "forecast_kboxes", path, line_no)
        p = _parse_float(row[2], "production_kboxes", path, line_no)
        if year in totals:
            raise ValidationError(f"{path}: line {line_no}: duplicate season {year}")
        totals[year] = (f, p)
    return totals


def load_forecast_history(path, temple_path=None) -> list[SeasonRecord]:
    """Load October forecast and realized production per season and type.

    When ``temple_path`` is given, temple-orange forecast and production
    totals are added to the NON_VALENCIA rows for seasons
    {TEMPLE_FIRST_SEASON}..{TEMPLE_LAST_SEASON} before the percent error
    is computed, reconciling the older reporting convention. Without a
    temple file, rows pass through unchanged.
    """
    temple = _load_temple_totals(temple_path) if temple_path is not None else None
    if temple is None:
        logger.info("no temple file supplied; forecast history passes through as-is")

    records: list[SeasonRecord] = []
    seen: set[tuple[int, OrangeType]] = set()
    applied: set[int] = set()
    for line_no, row in _read_csv_rows(path, FORECAST_HEADER):
        year = _parse_int(row[0], "season_year", path, line_no)
        try:
            otype = OrangeType.from_token(row[1])
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=line_no) from None
        f = _parse_float(row[2], "forecast_kboxes", path, line_no)
        p = _parse_float(row[3], "production_kboxes", path, line_no)
        key = (year, otype)
        if key in seen:
            raise ValidationError(
                f"{path}: line {line_no}: duplicate season/type "
                f"({year}, {otype.value})"
            )
        seen.add(key)
        if (
            temple is not None
            and otype is OrangeType.NON_VALENCIA
            and TEMPLE_FIRST_SEASON <= year <= TEMPLE_LAST_SEASON
            and year in temple
        ):
            tf, tp = temple[year]
            f += tf
            p += tp
            applied.add(year)
        try:
            records.append(SeasonRecord(year, otype, f, p))
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {line_no}: {exc}") from None

    if temple is not None:
        unmatched = sorted(set(temple) - applied)
        if unmatched:
            logger.warning(
                "temple seasons with no matching non-Valencia row in range: %s",
                unmatched,
            )
    return records


def write_forecast_history(records: Iterable[SeasonRecord], path) -> None:
    """Write records in the same four-column layout the loader reads."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FORECAST_HEADER)
        for r in records:
            w.writerow(
                [
                    r.season_year,
                    "VALENCIA" if r.orange_type is OrangeType.VALENCIA else "NON_VALENCIA",
                    repr(float(r.forecast_kboxes)),
                    repr(float(r.production_kboxes)),
                ]
            )


def load_weather_history(path) -> list[DailyWeatherRecord]:
    """Load daily station weather; empty fields become None."""
    records: list[DailyWeatherRecord] = []
    for line_no, row in _read_csv_rows(path, WEATHER_HEADER):
        try:
            d = date.fromisoformat(row[2])
        except ValueError:
            raise ParseError(f"bad date {row[2]!r}", path=path, line=line_no) from None
        tmin = _parse_optional_float(row[3], "tmin_c", path, line_no)
        tmax = _parse_optional_float(row[4], "tmax_c", path, line_no)
        precip = _parse_optional_float(row[5], "precip_mm", path, line_no)
        try:
            records.append(DailyWeatherRecord(row[0], row[1], d, tmin, tmax, precip))
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {line_no}: {exc}") from None
    return records


def select_station_per_county(
    records: Iterable[DailyWeatherRecord],
    counties: Sequence[str],
    window: tuple[date, date] | None = None,
) -> dict[str, str]:
    """Pick the most complete station per county.

    Completeness is the fraction of days in ``window`` (inclusive; defaults
    to the span of the data) on which the station reports all three of
    tmin, tmax, and precipitation. Ties break to the lexicographically
    smallest station id.
    """
    records = list(records)
    if window is None:
        if not records:
            raise ValidationError("no weather records to select stations from")
        dates = [r.date for r in records]
        window = (min(dates), max(dates))
    start, end = window
    if end < start:
        raise ValidationError("station-selection window ends before it starts")
    total_days = (end - start).days + 1

    complete_days: dict[str, set[date]] = {}
    station_county: dict[str, str] = {}
    for r in records:
        prev = station_county.setdefault(r.station_id, r.county)
        if prev != r.county:
            raise ValidationError(
                f"station {r.station_id} appears under two counties: "
                f"{prev!r} and {r.county!r}"
            )
        if (
            start <= r.date <= end
            and r.tmin_c is not None
            and r.tmax_c is not None
            and r.precip_mm is not None
        ):
            complete_days.setdefault(r.station_id, set()).add(r.date)

    by_county: dict[str, list[tuple[float, str]]] = {}
    for sid, county in station_county.items():
        frac = len(complete_days.get(sid, ())) / total_days
        by_county.setdefault(county, []).append((frac, sid))

    missing = [c for c in counties if c not in by_county]
    if missing:
        raise ValidationError(
            "no weather station for county: " + ", ".join(sorted(missing))
        )

    chosen: dict[str, str] = {}
    for county in counties:
        candidates = by_county[county]
        # max completeness, ties to smallest station id
        best = sorted(candidates, key=lambda t: (-t[0], t[1]))[0]
        chosen[county] = best[1]
    return chosen


def load_price_history(path) -> list[PriceBar]:
    """Load futures closes, enforcing global date order and per-contract
    strictly increasing dates."""
    bars: list[PriceBar] = []
    last_global: date | None = None
    last_by_contract: dict[str, date] = {}
    for line_no, row in _read_csv_rows(path, PRICE_HEADER):
        try:
            d = date.fromisoformat(row[0])
        except ValueError:
            raise ParseError(f"bad date {row[0]!r}", path=path, line=line_no) from None
        contract = row[1]
        if not contract:
            raise ParseError("empty contract id", path=path, line=line_no)
        close = _parse_float(row[2], "close", path, line_no)
        if close <= 0:
            raise ValidationError(
                f"{path}: line {line_no}: nonpositive close {close!r}"
            )
        if last_global is not None and d < last_global:
            raise ValidationError(
                f"{path}: line {line_no}: date {d} out of order"
            )
        prev = last_by_contract.get(contract)
        if prev is not None and d <= prev:
            raise ValidationError(
                f"{path}: line {line_no}: contract {contract} date {d} "
                f"not strictly increasing"
            )
        last_global = d
        last_by_contract[contract] = d
        bars.append(PriceBar(d, contract, close))
    return bars


_CALENDAR_KEYS = ("freeze_years", "hurricane_years", "cg_from_year")


def load_event_calendar(path) -> EventCalendar:
    """Parse the plain-text event calendar.

    Format: ``key = value`` lines, ``#`` comments. ``freeze_years`` and
    ``hurricane_years`` take comma- or space-separated season years;
    ``cg_from_year`` takes a single year.
    """
    found: dict[str, str] = {}
    with _open_text(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path=path, line=line_no)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CALENDAR_KEYS:
                raise ParseError(f"unknown key {key!r}", path=path, line=line_no)
            if key in found:
                raise ParseError(f"duplicate key {key!r}", path=path, line=line_no)
            found[key] = value.strip()

    for key in _CALENDAR_KEYS:
        if key not in found:
            raise ParseError(f"missing key {key!r}", path=path)

    def parse_years(text: str, key: str) -> frozenset[int]:
        if not text:
            return frozenset()
        tokens = text.replace(",", " ").split()
        try:
            return frozenset(int(t) for t in tokens)
        except ValueError:
            raise ParseError(f"bad year list for {key}: {text!r}", path=path) from None

    try:
        cg_from = int(found["cg_from_year"])
    except ValueError:
        raise ParseError(
            f"bad cg_from_year: {found['cg_from_year']!r}", path=path
        ) from None

    return EventCalendar(
        freeze_years=parse_years(found["freeze_years"], "freeze_years"),
        hurricane_years=parse_years(found["hurricane_years"], "hurricane_years"),
        cg_from_year=cg_from,
    )
