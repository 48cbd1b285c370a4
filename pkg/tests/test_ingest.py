import math
from datetime import date, timedelta

import numpy as np
import pytest

from orangecast.errors import ParseError, ValidationError
from orangecast.ingest import (
    EventCalendar,
    OrangeType,
    SeasonRecord,
    load_event_calendar,
    load_forecast_history,
    load_price_history,
    load_weather_history,
    percent_error,
    select_station_per_county,
    write_forecast_history,
)


def test_percent_error_basic_values():
    assert percent_error(110.0, 100.0) == 10.0
    assert percent_error(100.0, 100.0) == 0.0
    # forecast below production -> negative error
    assert percent_error(90.0, 100.0) == pytest.approx(-10.0)


def test_percent_error_matches_direct_formula_on_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        p = float(rng.uniform(1.0, 1e6))
        f = float(rng.uniform(0.5, 2.0)) * p
        got = percent_error(f, p)
        want = 100.0 * (f - p) / p
        assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12)


def test_percent_error_rejects_nonpositive_production():
    with pytest.raises(ValidationError):
        percent_error(100.0, 0.0)
    with pytest.raises(ValidationError):
        percent_error(100.0, -5.0)


def test_season_record_derives_error_and_validates():
    r = SeasonRecord(1998, OrangeType.VALENCIA, 121.0, 110.0)
    assert r.pct_error == pytest.approx(100.0 * 11.0 / 110.0)
    with pytest.raises(ValidationError):
        SeasonRecord(1998, OrangeType.VALENCIA, 121.0, 0.0)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_forecast_history_round_trip(tmp_path):
    src = _write(
        tmp_path / "f.csv",
        "season_year,orange_type,forecast_kboxes,production_kboxes\n"
        "1990,NON_VALENCIA,110.5,100.25\n"
        "1990,VALENCIA,95.0,100.0\n",
    )
    records = load_forecast_history(src)
    assert len(records) == 2
    assert records[0].orange_type is OrangeType.NON_VALENCIA
    assert records[0].pct_error == pytest.approx(100.0 * 10.25 / 100.25)

    out = tmp_path / "copy.csv"
    write_forecast_history(records, out)
    again = load_forecast_history(out)
    assert again == records


def test_forecast_history_reports_line_numbers(tmp_path):
    src = _write(
        tmp_path / "f.csv",
        "season_year,orange_type,forecast_kboxes,production_kboxes\n"
        "1990,NON_VALENCIA,110.5,100.25\n"
        "1991,NON_VALENCIA,oops,100.0\n",
    )
    with pytest.raises(ParseError) as err:
        load_forecast_history(src)
    assert "line 3" in str(err.value)


def test_forecast_history_rejects_duplicates_and_bad_production(tmp_path):
    dup = _write(
        tmp_path / "dup.csv",
        "season_year,orange_type,forecast_kboxes,production_kboxes\n"
        "1990,VALENCIA,1.0,2.0\n"
        "1990,VALENCIA,1.5,2.5\n",
    )
    with pytest.raises(ValidationError) as err:
        load_forecast_history(dup)
    assert "duplicate" in str(err.value)

    bad = _write(
        tmp_path / "bad.csv",
        "season_year,orange_type,forecast_kboxes,production_kboxes\n"
        "1990,VALENCIA,1.0,0.0\n",
    )
    with pytest.raises(ValidationError) as err:
        load_forecast_history(bad)
    assert "line 2" in str(err.value)


def test_forecast_history_rejects_wrong_header(tmp_path):
    src = _write(tmp_path / "f.csv", "year,type,f,p\n1990,VALENCIA,1,1\n")
    with pytest.raises(ParseError):
        load_forecast_history(src)


def test_temple_adjustment_adds_both_columns_for_early_nonvalencia(tmp_path):
    main = _write(
        tmp_path / "f.csv",
        "season_year,orange_type,forecast_kboxes,production_kboxes\n"
        "2000,NON_VALENCIA,90.0,80.0\n"
        "2000,VALENCIA,50.0,55.0\n"
        "2006,NON_VALENCIA,70.0,75.0\n",
    )
    temple = _write(
        tmp_path / "t.csv",
        "season_year,forecast_kboxes,production_kboxes\n"
        "2000,10.0,20.0\n"
        "2006,5.0,5.0\n",  # out of range, must be ignored
    )
    records = load_forecast_history(main, temple)
    by_key = {(r.season_year, r.orange_type): r for r in records}

    adjusted = by_key[(2000, OrangeType.NON_VALENCIA)]
    assert adjusted.forecast_kboxes == pytest.approx(100.0)
    assert adjusted.production_kboxes == pytest.approx(100.0)
    assert adjusted.pct_error == pytest.approx(0.0)

    # valencia and post-2005 rows untouched
    assert by_key[(2000, OrangeType.VALENCIA)].forecast_kboxes == 50.0
    assert by_key[(2006, OrangeType.NON_VALENCIA)].forecast_kboxes == 70.0

    # without a temple file nothing changes
    plain = load_forecast_history(main)
    assert {(r.season_year, r.orange_type): r.forecast_kboxes for r in plain}[
        (2000, OrangeType.NON_VALENCIA)
    ] == 90.0


def test_weather_loader_handles_missing_fields_and_line_numbers(tmp_path):
    src = _write(
        tmp_path / "w.csv",
        "station_id,county,date,tmin_c,tmax_c,precip_mm\n"
        "S1,Collier,2001-01-05,3.5,,0.0\n"
        "S1,Collier,2001-01-06,,,\n",
    )
    records = load_weather_history(src)
    assert records[0].tmax_c is None
    assert records[1].tmin_c is None and records[1].precip_mm is None

    bad_date = _write(
        tmp_path / "w2.csv",
        "station_id,county,date,tmin_c,tmax_c,precip_mm\n"
        "S1,Collier,01/05/2001,1,2,0\n",
    )
    with pytest.raises(ParseError) as err:
        load_weather_history(bad_date)
    assert "line 2" in str(err.value)

    inverted = _write(
        tmp_path / "w3.csv",
        "station_id,county,date,tmin_c,tmax_c,precip_mm\n"
        "S1,Collier,2001-01-05,9.0,2.0,0\n",
    )
    with pytest.raises(ValidationError) as err:
        load_weather_history(inverted)
    assert "line 2" in str(err.value)


def _mk_weather_rows(station, county, start, n_days, complete_mask):
    from orangecast.ingest import DailyWeatherRecord

    rows = []
    for i in range(n_days):
        d = start + timedelta(days=i)
        if complete_mask[i]:
            rows.append(DailyWeatherRecord(station, county, d, 1.0, 10.0, 0.5))
        else:
            rows.append(DailyWeatherRecord(station, county, d, 1.0, 10.0, None))
    return rows


def test_station_selection_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    start = date(1990, 1, 1)
    n_days = 60
    window = (start, start + timedelta(days=n_days - 1))
    for trial in range(25):
        counties = ["A", "B"]
        records = []
        truth: dict[str, list[tuple[float, str]]] = {"A": [], "B": []}
        for county in counties:
            for s in range(3):
                sid = f"{county}{s}"
                mask = rng.random(n_days) < rng.uniform(0.3, 1.0)
                records.extend(_mk_weather_rows(sid, county, start, n_days, mask))
                truth[county].append((float(mask.sum()) / n_days, sid))
        chosen = select_station_per_county(records, counties, window)
        for county in counties:
            want = sorted(truth[county], key=lambda t: (-t[0], t[1]))[0][1]
            assert chosen[county] == want, f"trial {trial} county {county}"


def test_station_selection_tie_breaks_lexicographically():
    start = date(1990, 1, 1)
    mask = [True] * 10
    records = _mk_weather_rows("S9", "A", start, 10, mask) + _mk_weather_rows(
        "S1", "A", start, 10, mask
    )
    window = (start, start + timedelta(days=9))
    assert select_station_per_county(records, ["A"], window) == {"A": "S1"}


def test_station_selection_missing_county_lists_it():
    start = date(1990, 1, 1)
    records = _mk_weather_rows("S1", "A", start, 5, [True] * 5)
    with pytest.raises(ValidationError) as err:
        select_station_per_county(records, ["A", "Nowhere"], (start, start))
    assert "Nowhere" in str(err.value)


def test_price_loader_validates_order_and_values(tmp_path):
    good = _write(
        tmp_path / "p.csv",
        "date,contract,close_cents_per_lb\n"
        "1990-10-01,OJ1991H,120.5\n"
        "1990-10-01,OJ1991K,122.0\n"
        "1990-10-08,OJ1991H,121.0\n",
    )
    bars = load_price_history(good)
    assert len(bars) == 3

    nonpos = _write(
        tmp_path / "p2.csv",
        "date,contract,close_cents_per_lb\n1990-10-01,OJ,0.0\n",
    )
    with pytest.raises(ValidationError) as err:
        load_price_history(nonpos)
    assert "line 2" in str(err.value)

    unsorted_file = _write(
        tmp_path / "p3.csv",
        "date,contract,close_cents_per_lb\n"
        "1990-10-08,OJ,120.0\n"
        "1990-10-01,OJ,121.0\n",
    )
    with pytest.raises(ValidationError) as err:
        load_price_history(unsorted_file)
    assert "line 3" in str(err.value)

    dup = _write(
        tmp_path / "p4.csv",
        "date,contract,close_cents_per_lb\n"
        "1990-10-01,OJ,120.0\n"
        "1990-10-01,OJ,121.0\n",
    )
    with pytest.raises(ValidationError) as err:
        load_price_history(dup)
    assert "line 3" in str(err.value)


def test_event_calendar_parse_and_indicators(tmp_path):
    src = _write(
        tmp_path / "cal.txt",
        "# shocks\n"
        "freeze_years = 1981, 1982 1985\n"
        "hurricane_years = 2004,2005\n"
        "cg_from_year = 2013\n",
    )
    cal = load_event_calendar(src)
    assert cal.freezes(1981) == 1 and cal.freezes(1990) == 0
    assert cal.hurricanes(2005) == 1
    assert cal.cg(2012) == 0 and cal.cg(2013) == 1 and cal.cg(2020) == 1
    assert cal.indicators(2013) == {"Freezes": 0, "Hurricanes": 0, "Cg": 1}


def test_event_calendar_rejects_bad_content(tmp_path):
    with pytest.raises(ParseError):
        load_event_calendar(
            _write(tmp_path / "c1.txt", "freeze_years = 1981\nwhat = 1\n")
        )
    with pytest.raises(ParseError):
        load_event_calendar(_write(tmp_path / "c2.txt", "freeze_years = 1981\n"))


def test_gzip_csv_loads_transparently(tmp_path):
    import gzip

    path = tmp_path / "w.csv.gz"
    body = (
        "station_id,county,date,tmin_c,tmax_c,precip_mm\n"
        "S1,Collier,2001-01-05,3.5,9.0,0.0\n"
    )
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        fh.write(body)
    records = load_weather_history(path)
    assert len(records) == 1 and records[0].tmin_c == 3.5
