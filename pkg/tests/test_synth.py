import gzip
import hashlib
import json
from pathlib import Path

import pytest

from orangecast import pipeline
from orangecast.clustering import cluster_counties
from orangecast.ingest import OrangeType
from orangecast.synth import generate_dataset


def _tree_hashes(root: Path) -> dict[str, str]:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.iterdir())
    }


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthdata")
    generate_dataset(root, seed=7, first_season=1996, last_season=2010)
    return root


def test_same_seed_same_bytes(tmp_path, dataset):
    again = tmp_path / "again"
    generate_dataset(again, seed=7, first_season=1996, last_season=2010)
    assert _tree_hashes(again) == _tree_hashes(dataset)


def test_other_seed_other_content(tmp_path, dataset):
    other = tmp_path / "other"
    generate_dataset(other, seed=8, first_season=1996, last_season=2010)
    a = _tree_hashes(dataset)
    b = _tree_hashes(other)
    assert set(a) == set(b)
    assert a["forecasts.csv"] != b["forecasts.csv"]


def test_gzip_member_is_reproducible(dataset):
    # mtime and filename are pinned inside the gzip header
    raw = (dataset / "weather.csv.gz").read_bytes()
    assert raw[4:8] == b"\x00\x00\x00\x00"
    with gzip.open(dataset / "weather.csv.gz", "rt") as fh:
        header = fh.readline().strip()
    assert header == "station_id,county,date,tmin_c,tmax_c,precip_mm"


def test_planted_clusters_recovered(dataset):
    truth = json.loads((dataset / "truth.json").read_text())
    ds = pipeline.load_dataset(dataset)
    assignment = cluster_counties(ds.yields, k=4, seed=0, restarts=10)
    got = {
        county: cid
        for cid in assignment.cluster_ids()
        for county in assignment.members(cid)
    }
    assert got == truth["clusters"]


def test_planted_cold_day_counts_recovered(dataset):
    truth = json.loads((dataset / "truth.json").read_text())
    ds = pipeline.load_dataset(dataset)
    matrix, _ = pipeline.build_matrix(ds, "pre", pipeline.PipelineConfig())
    for cluster, per_season in truth["planted_jan4c"].items():
        col = f"{cluster}_Jan4c"
        assert col in matrix.columns
        for season_str, want in per_season.items():
            got = matrix.row(int(season_str), [col])[0]
            assert got == want, (col, season_str)


def test_planted_errors_survive_the_temple_merge(dataset):
    truth = json.loads((dataset / "truth.json").read_text())
    ds = pipeline.load_dataset(dataset)
    for token, otype in (
        ("nonvalencia", OrangeType.NON_VALENCIA),
        ("valencia", OrangeType.VALENCIA),
    ):
        planted = truth["errors"][token]
        loaded = pipeline.error_series(ds.seasons, otype)
        assert set(loaded) == {int(y) for y in planted}
        for year_str, want in planted.items():
            assert loaded[int(year_str)] == pytest.approx(want, abs=1e-9)


def test_calendar_matches_truth(dataset):
    truth = json.loads((dataset / "truth.json").read_text())
    ds = pipeline.load_dataset(dataset)
    assert sorted(ds.calendar.freeze_years) == truth["calendar"]["freeze_years"]
    assert sorted(ds.calendar.hurricane_years) == (
        truth["calendar"]["hurricane_years"]
    )
    assert ds.calendar.cg_from_year == truth["calendar"]["cg_from_year"]
