"""Deterministic synthetic dataset generator.

Produces a complete dataset directory (forecast history with a satsuma-
style side file, daily weather, county yields, futures prices, event
calendar, config, and a truth file) with planted structure:

- four county groups with distinct yield trajectories, so clustering has
  an exact answer;
- per-group January cold-day counts, planted exactly, so feature counts
  are known in advance;
- percent errors that are a linear function of one group's January
  cold-day count plus event-indicator bumps and small noise, so local
  regression has a recoverable signal.

Everything derives from one integer seed; two runs with the same seed
write byte-identical trees (the weather gzip is stamped with a zero
mtime for that reason).
"""

from __future__ import annotations

import gzip
import json
import math
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import normalize_scope
from .ingest import (
    FORECAST_HEADER,
    PRICE_HEADER,
    TEMPLE_HEADER,
    TEMPLE_FIRST_SEASON,
    TEMPLE_LAST_SEASON,
    WEATHER_HEADER,
)

__all__ = ["COUNTY_GROUPS", "generate_dataset"]

# Counties in yields-file order; the group ids match the C1..C4 labels
# that first-appearance relabeling assigns to this ordering.
COUNTY_GROUPS: tuple[tuple[str, int], ...] = (
    ("Manatee", 1),
    ("Hardee", 1),
    ("DeSoto", 1),
    ("Polk", 2),
    ("Highlands", 2),
    ("Charlotte", 3),
    ("Glades", 3),
    ("Collier", 3),
    ("Hendry", 3),
    ("St. Lucie", 4),
    ("Indian River", 4),
)

_NV_MODEL = {
    "intercept": 1.2,
    "slope": 0.65,
    "group": 3,
    "predictor": "C3_Jan4c",
    "freeze": 3.5,
    "hurricane": 2.0,
    "cg": -1.0,
    "noise_sd": 0.4,
}
_V_MODEL = {
    "intercept": 0.8,
    "slope": 0.45,
    "group": 1,
    "predictor": "C1_Jan4c",
    "freeze": 2.5,
    "hurricane": 1.5,
    "cg": -0.8,
    "noise_sd": 0.4,
}


def _round1(x: float) -> float:
    return round(float(x), 1)


def _year_days(year: int) -> list[date]:
    d = date(year, 1, 1)
    out = []
    while d.year == year:
        out.append(d)
        d += timedelta(days=1)
    return out


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _season_errors(rng, seasons, x_counts, model, calendar):
    noise = rng.normal(0.0, model["noise_sd"], size=len(seasons))
    out = {}
    for i, y in enumerate(seasons):
        out[y] = float(
            model["intercept"]
            + model["slope"] * x_counts[i]
            + model["freeze"] * (1 if y in calendar["freeze_years"] else 0)
            + model["hurricane"] * (1 if y in calendar["hurricane_years"] else 0)
            + model["cg"] * (1 if y >= calendar["cg_from_year"] else 0)
            + noise[i]
        )
    return out


def _production_series(rng, seasons, base):
    steps = rng.normal(0.0, 3000.0, size=len(seasons))
    levels = base + np.cumsum(steps)
    return {y: float(max(30000.0, lv)) for y, lv in zip(seasons, levels)}


def generate_dataset(
    out_dir,
    seed: int = 7,
    first_season: int = 1996,
    last_season: int = 2017,
) -> dict:
    """Write a synthetic dataset tree into out_dir; returns the truth
    document (also saved as truth.json)."""
    if last_season - first_season + 1 < 8:
        raise ValidationError("need at least 8 seasons of synthetic data")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    seasons = list(range(first_season, last_season + 1))
    n = len(seasons)

    # --- event calendar ----------------------------------------------
    freezes = sorted(
        int(y) for y in rng.permutation(np.array(seasons[: n // 2]))[:2]
    )
    hurricanes = [y for y in (2004, 2005) if y in seasons] or [seasons[-3]]
    calendar = {
        "freeze_years": freezes,
        "hurricane_years": hurricanes,
        "cg_from_year": 2013,
    }

    # --- planted January cold-day counts per group --------------------
    jan4 = {g: rng.integers(0, 13, size=n) for g in (1, 2, 3, 4)}
    jan1 = {
        g: np.array([int(rng.integers(0, c + 1)) for c in jan4[g]])
        for g in (1, 2, 3, 4)
    }

    # --- percent errors and forecast history --------------------------
    nv_err = _season_errors(rng, seasons, jan4[_NV_MODEL["group"]], _NV_MODEL, calendar)
    v_err = _season_errors(rng, seasons, jan4[_V_MODEL["group"]], _V_MODEL, calendar)
    nv_prod = _production_series(rng, seasons, 120000.0)
    v_prod = _production_series(rng, seasons, 90000.0)
    temple_share = {
        y: 0.12 + 0.03 * float(rng.random())
        for y in seasons
        if TEMPLE_FIRST_SEASON <= y <= TEMPLE_LAST_SEASON
    }

    forecast_rows = []
    temple_rows = []
    for y in seasons:
        p = nv_prod[y]
        f = p * (1.0 + nv_err[y] / 100.0)
        if y in temple_share:
            pt = p * temple_share[y]
            ft = pt * (1.0 + nv_err[y] / 100.0)
            temple_rows.append((y, repr(float(ft)), repr(float(pt))))
            forecast_rows.append(
                (y, "NON_VALENCIA", repr(float(f - ft)), repr(float(p - pt)))
            )
        else:
            forecast_rows.append((y, "NON_VALENCIA", repr(float(f)), repr(float(p))))
        pv = v_prod[y]
        fv = pv * (1.0 + v_err[y] / 100.0)
        forecast_rows.append((y, "VALENCIA", repr(float(fv)), repr(float(pv))))
    _write_csv(out / "forecasts.csv", FORECAST_HEADER, forecast_rows)
    _write_csv(out / "temple.csv", TEMPLE_HEADER, temple_rows)

    # --- county yields with group-specific trajectories ---------------
    t = np.linspace(-1.0, 1.0, n)
    shapes = {
        1: 40.0 * t,
        2: -40.0 * t,
        3: 35.0 * np.sin(3.0 * t),
        4: 35.0 * np.cos(3.0 * t),
    }
    yield_rows = []
    for county, g in COUNTY_GROUPS:
        series = 300.0 + 10.0 * g + shapes[g] + rng.normal(0.0, 2.0, size=n)
        for y, v in zip(seasons, series):
            yield_rows.append((county, y, repr(_round1(v))))
    _write_csv(out / "yields.csv", ("county", "year", "yield"), yield_rows)

    # --- daily weather -------------------------------------------------
    # Pre-phase January of season y is calendar January of y-1, so the
    # planted counts for seasons [first, last] live in calendar years
    # [first-1, last-1]. The series starts two years before the first
    # season (Nov/Dec pre windows) and runs through the last season.
    w_first = first_season - 2
    w_last = last_season
    season_by_jan_year = {y - 1: y for y in seasons}
    group_by_county = dict(COUNTY_GROUPS)

    stations = [("S%02d" % (i + 1), county) for i, (county, _) in enumerate(COUNTY_GROUPS)]
    # an extra gap-riddled Polk station that loses the completeness vote
    stations.insert(3, ("S00", "Polk"))

    weather_lines = [",".join(WEATHER_HEADER)]
    for sid, county in stations:
        g = group_by_county[county]
        gappy = sid == "S00"
        for year in range(w_first, w_last + 1):
            days = _year_days(year)
            nd = len(days)
            doy = np.arange(1, nd + 1)
            base = 12.0 + 8.0 * np.sin(2.0 * math.pi * (doy - 100) / 365.0)
            tmin = base + rng.normal(0.0, 2.0, size=nd)
            spread = rng.uniform(5.0, 12.0, size=nd)

            season = season_by_jan_year.get(year)
            if season is not None:
                # plant exact January cold-day counts for this group
                i_season = seasons.index(season)
                x4 = int(jan4[g][i_season])
                x1 = int(jan1[g][i_season])
                jan_idx = np.array(
                    [i for i, d in enumerate(days) if d.month == 1]
                )
                order = rng.permutation(len(jan_idx))
                cold = jan_idx[order]
                tmin[cold[:x1]] = rng.uniform(-3.0, 0.5, size=x1)
                tmin[cold[x1:x4]] = rng.uniform(1.2, 3.5, size=x4 - x1)
                tmin[cold[x4:]] = rng.uniform(4.8, 14.0, size=len(cold) - x4)

            tmax = tmin + spread
            wet_p = np.where(np.isin(((doy - 1) // 30) % 12 + 1, (6, 7, 8, 9)), 0.45, 0.3)
            wet = rng.random(nd) < wet_p
            precip = np.where(wet, rng.gamma(2.0, 6.0, size=nd), 0.0)

            keep = np.ones(nd, dtype=bool)
            if gappy:
                keep = rng.random(nd) > 0.3
            for i, d in enumerate(days):
                if not keep[i]:
                    continue
                weather_lines.append(
                    "%s,%s,%s,%s,%s,%s"
                    % (
                        sid,
                        county,
                        d.isoformat(),
                        _round1(tmin[i]),
                        _round1(tmax[i]),
                        _round1(precip[i]),
                    )
                )
    payload = ("\n".join(weather_lines) + "\n").encode("utf-8")
    with open(out / "weather.csv.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", filename="", mtime=0) as gz:
            gz.write(payload)

    # --- futures prices -------------------------------------------------
    price_rows = []
    d = date(first_season - 1, 1, 4)
    last_price_day = date(last_season, 12, 25)
    steps = []
    while d <= last_price_day:
        steps.append(d)
        d += timedelta(days=7)
    walk = 100.0 * np.exp(np.cumsum(rng.normal(0.0, 0.02, size=len(steps))))
    for d, c in zip(steps, walk):
        price_rows.append((d.isoformat(), "OJ1", repr(round(float(c), 2))))
    _write_csv(out / "prices.csv", PRICE_HEADER, price_rows)

    # --- calendar, config, truth ----------------------------------------
    (out / "calendar.txt").write_text(
        "# synthetic event calendar\n"
        f"freeze_years = {' '.join(str(y) for y in freezes)}\n"
        f"hurricane_years = {' '.join(str(y) for y in hurricanes)}\n"
        f"cg_from_year = {calendar['cg_from_year']}\n",
        encoding="utf-8",
    )

    config = {
        "data_dir": ".",
        "k": 4,
        "cluster_seed": 0,
        "restarts": 10,
        "b": 1000,
        "seed": 0,
        "tau": 5.0,
        "p_high": 0.9,
        "p_low": 0.1,
    }
    (out / "config.json").write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8"
    )

    truth = {
        "seed": seed,
        "first_season": first_season,
        "last_season": last_season,
        "clusters": {
            county: f"C{g}" for county, g in COUNTY_GROUPS
        },
        "scopes": {
            normalize_scope(county): f"C{g}" for county, g in COUNTY_GROUPS
        },
        "planted_jan4c": {
            f"C{g}": {str(y): int(c) for y, c in zip(seasons, jan4[g])}
            for g in (1, 2, 3, 4)
        },
        "planted_jan1c": {
            f"C{g}": {str(y): int(c) for y, c in zip(seasons, jan1[g])}
            for g in (1, 2, 3, 4)
        },
        "error_model": {"nonvalencia": _NV_MODEL, "valencia": _V_MODEL},
        "errors": {
            "nonvalencia": {str(y): nv_err[y] for y in seasons},
            "valencia": {str(y): v_err[y] for y in seasons},
        },
        "calendar": calendar,
    }
    (out / "truth.json").write_text(
        json.dumps(truth, indent=2) + "\n", encoding="utf-8"
    )
    return truth
