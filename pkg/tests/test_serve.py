import json
import shutil
from importlib import resources
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from orangecast.serve import create_app


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    artifacts = tmp_path_factory.mktemp("served")
    src = Path(resources.files("orangecast") / "fixtures" / "decision")
    for name in (
        "distribution_nonvalencia_2018.json",
        "distribution_valencia_2017.json",
        "payoffs_nonvalencia.json",
        "payoffs_valencia.json",
    ):
        shutil.copy(src / name, artifacts)
    with TestClient(create_app(artifacts)) as c:
        c.artifacts = artifacts
        yield c


def test_distribution_returns_the_stored_document(client):
    r = client.get("/distribution", params={"season": 2018, "type": "nonvalencia"})
    assert r.status_code == 200
    stored = json.loads(
        (client.artifacts / "distribution_nonvalencia_2018.json").read_text()
    )
    assert r.json() == stored
    assert len(r.json()["samples"]) == 1000


def test_payoffs_returns_the_stored_document(client):
    r = client.get("/payoffs", params={"type": "valencia"})
    assert r.status_code == 200
    assert r.json()["e_long_per_contract"] == 3947.5
    assert r.json()["e_short_per_contract"] == 2811.1


def test_recommendation_defaults_reproduce_the_narrated_long_call(client):
    r = client.get(
        "/recommendation", params={"season": 2018, "type": "nonvalencia"}
    )
    assert r.status_code == 200
    doc = r.json()
    assert doc["scenario"] == "A_Overestimate"
    assert doc["position"] == "Long"
    assert doc["p_exceed"] == 0.93
    assert doc["emv_long"] == pytest.approx(2708.762, abs=1e-6)
    assert doc["season_year"] == 2018
    assert "farmer" in doc["actions"] and "processor" in doc["actions"]


def test_recommendation_on_valencia_fixture_is_short(client):
    r = client.get(
        "/recommendation", params={"season": 2017, "type": "valencia"}
    )
    doc = r.json()
    assert doc["scenario"] == "B_Underestimate"
    assert doc["position"] == "Short"
    assert doc["p_exceed"] == 0.003


def test_identical_queries_get_identical_bodies(client):
    params = {"season": 2018, "type": "nonvalencia", "tau": 4.2, "p_high": 0.8}
    a = client.get("/recommendation", params=params)
    b = client.get("/recommendation", params=params)
    assert a.content == b.content


def test_recommendation_recomputes_from_query_parameters(client):
    # raising tau above nearly all samples flips the call to Short
    r = client.get(
        "/recommendation",
        params={"season": 2018, "type": "nonvalencia", "tau": 20.0},
    )
    assert r.json()["scenario"] == "B_Underestimate"
    assert r.json()["position"] == "Short"

    # a stricter p_high leaves 0.93 in the middle zone
    r = client.get(
        "/recommendation",
        params={"season": 2018, "type": "nonvalencia", "p_high": 0.95},
    )
    assert r.json()["scenario"] == "C_Close"

    # tilt only ever annotates the middle zone
    r = client.get(
        "/recommendation",
        params={
            "season": 2018,
            "type": "nonvalencia",
            "p_high": 0.95,
            "tilt": "raises_overestimation",
        },
    )
    assert "tilt_advisory" in r.json()["flags"]
    r = client.get(
        "/recommendation",
        params={
            "season": 2018,
            "type": "nonvalencia",
            "tilt": "raises_overestimation",
        },
    )
    assert "tilt_advisory" not in r.json()["flags"]


def test_missing_artifacts_are_404(client):
    r = client.get("/distribution", params={"season": 1900, "type": "valencia"})
    assert r.status_code == 404
    assert "1900" in r.json()["error"]
    r = client.get(
        "/recommendation", params={"season": 1900, "type": "valencia"}
    )
    assert r.status_code == 404


def test_bad_type_and_bad_tilt_are_400(client):
    r = client.get("/payoffs", params={"type": "grapefruit"})
    assert r.status_code == 400
    assert "grapefruit" in r.json()["error"]
    r = client.get(
        "/recommendation",
        params={"season": 2018, "type": "nonvalencia", "tilt": "sideways"},
    )
    assert r.status_code == 400
    assert "sideways" in r.json()["error"]


def test_missing_required_query_parameter_is_422(client):
    assert client.get("/distribution", params={"type": "valencia"}).status_code == 422
    assert client.get("/payoffs").status_code == 422


def test_type_tokens_are_normalized(client):
    for token in ("NonValencia", "NON_VALENCIA", "non-valencia", "earlymid"):
        r = client.get("/payoffs", params={"type": token})
        assert r.status_code == 200, token
        assert r.json()["e_long_per_contract"] == 3060.4


def test_payoff_overrides_recompute_server_side(client):
    base = {"season": 2018, "type": "nonvalencia"}
    r = client.get("/recommendation", params=base)
    stock = r.json()
    assert stock["payoffs_used"] == {
        "e_long_per_contract": 3060.4,
        "e_short_per_contract": 1963.0,
        "overridden": False,
    }
    assert "payoff_override" not in stock["flags"]

    r = client.get("/recommendation", params={**base, "e_long": 1000.0, "e_short": 500.0})
    doc = r.json()
    assert r.status_code == 200
    assert doc["payoffs_used"] == {
        "e_long_per_contract": 1000.0,
        "e_short_per_contract": 500.0,
        "overridden": True,
    }
    assert "payoff_override" in doc["flags"]
    # p=0.93: emv_long = 0.93*1000 - 0.07*500 = 895
    assert doc["emv_long"] == pytest.approx(895.0, abs=1e-9)
    assert doc["emv_short"] == pytest.approx(-895.0, abs=1e-9)
    assert doc["scenario"] == stock["scenario"]  # scenario ignores payoffs

    # one-sided override keeps the stored value on the other side
    r = client.get("/recommendation", params={**base, "e_short": 500.0})
    doc = r.json()
    assert doc["payoffs_used"]["e_long_per_contract"] == 3060.4
    assert doc["payoffs_used"]["e_short_per_contract"] == 500.0
    assert doc["payoffs_used"]["overridden"] is True


def test_payoff_override_must_be_finite_and_nonnegative(client):
    base = {"season": 2018, "type": "nonvalencia"}
    for bad in ("-1.0", "nan", "inf"):
        r = client.get("/recommendation", params={**base, "e_long": bad})
        assert r.status_code == 400, bad
        assert "e_long" in r.json()["error"]
    r = client.get("/recommendation", params={**base, "e_short": "oops"})
    assert r.status_code == 422
