"""Read-only HTTP access to forecast artifacts.

The app serves distribution and payoff JSON documents written by the
CLI pipeline and recomputes recommendations on demand, so a browser
client can explore thresholds without being able to change anything on
disk. Responses are deterministic: identical queries return identical
bodies.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

from fastapi import FastAPI, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import pipeline
from .decision import load_payoffs, recommend, recommendation_to_json_dict
from .errors import OrangecastError
from .forecast import Tilt, load_distribution
from .ingest import OrangeType

DEFAULT_TAU = 5.0
DEFAULT_P_HIGH = 0.9
DEFAULT_P_LOW = 0.1


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(artifact_dir) -> FastAPI:
    """App bound to one artifact directory; nothing is ever written."""
    root = Path(artifact_dir)
    app = FastAPI(title="orangecast", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET"],
        allow_headers=["*"],
    )

    def parse_type(token: str) -> OrangeType:
        return OrangeType.from_token(token)

    def distribution_path(orange_type: OrangeType, season: int) -> Path:
        return root / pipeline.distribution_filename(orange_type, season)

    def payoffs_path(orange_type: OrangeType) -> Path:
        return root / pipeline.payoffs_filename(orange_type)

    @app.get("/distribution")
    def get_distribution(season: int = Query(...), type: str = Query(...)):
        try:
            orange_type = parse_type(type)
        except OrangecastError as exc:
            return _error(400, str(exc))
        path = distribution_path(orange_type, season)
        if not path.exists():
            return _error(404, f"no stored distribution for {type} {season}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    @app.get("/payoffs")
    def get_payoffs(type: str = Query(...)):
        try:
            orange_type = parse_type(type)
        except OrangecastError as exc:
            return _error(400, str(exc))
        path = payoffs_path(orange_type)
        if not path.exists():
            return _error(404, f"no stored payoff estimates for {type}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    @app.get("/recommendation")
    def get_recommendation(
        season: int = Query(...),
        type: str = Query(...),
        tau: float = Query(DEFAULT_TAU),
        p_high: float = Query(DEFAULT_P_HIGH),
        p_low: float = Query(DEFAULT_P_LOW),
        tilt: str | None = Query(None),
        e_long: float | None = Query(None),
        e_short: float | None = Query(None),
    ):
        try:
            orange_type = parse_type(type)
        except OrangecastError as exc:
            return _error(400, str(exc))
        if tilt is not None:
            try:
                tilt = Tilt(tilt).value
            except ValueError:
                allowed = ", ".join(t.value for t in Tilt)
                return _error(400, f"unknown tilt {tilt!r} (expected one of {allowed})")
        dist_path = distribution_path(orange_type, season)
        if not dist_path.exists():
            return _error(404, f"no stored distribution for {type} {season}")
        pay_path = payoffs_path(orange_type)
        if not pay_path.exists():
            return _error(404, f"no stored payoff estimates for {type}")
        dist = load_distribution(dist_path)
        payoffs = load_payoffs(pay_path)
        overridden = e_long is not None or e_short is not None
        if overridden:
            # what-if payoff magnitudes, dollars per contract; the stored
            # estimates stay on disk untouched
            for name, value in (("e_long", e_long), ("e_short", e_short)):
                if value is not None and not (math.isfinite(value) and value >= 0.0):
                    return _error(400, f"{name} must be a finite value >= 0, got {value}")
            up = payoffs.e_long_per_contract if e_long is None else e_long
            down = payoffs.e_short_per_contract if e_short is None else e_short
            per_lb = 100.0 / payoffs.contract_lbs
            payoffs = dataclasses.replace(
                payoffs,
                e_long_per_contract=up,
                e_short_per_contract=down,
                e_long_cents_per_lb=up * per_lb,
                e_short_cents_per_lb=down * per_lb,
            )
        try:
            rec = recommend(
                dist,
                payoffs,
                tau=tau,
                p_high=p_high,
                p_low=p_low,
                tilt=tilt if tilt is not None else dist.tilt,
            )
        except OrangecastError as exc:
            return _error(400, str(exc))
        doc = recommendation_to_json_dict(rec)
        doc["season_year"] = season
        doc["orange_type"] = orange_type.value
        doc["payoffs_used"] = {
            "e_long_per_contract": payoffs.e_long_per_contract,
            "e_short_per_contract": payoffs.e_short_per_contract,
            "overridden": overridden,
        }
        if overridden:
            doc["flags"] = [*doc["flags"], "payoff_override"]
        return doc

    return app
