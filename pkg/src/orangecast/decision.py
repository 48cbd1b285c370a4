"""Hedging economics: historical payoff magnitudes, expected monetary
value, and position recommendations.

Price moves are measured per past season from the first futures close on
or after the October announcement to the mean close of the exit month
(March of the following year for the early/mid crop, May for Valencia,
matching each crop's maturity). Upward and downward moves are summarized
separately by the absolute mean of bootstrapped medians, giving stable
typical magnitudes for what a long or a short position stands to gain.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .forecast import ErrorDistribution, Tilt, exceedance_probability
from .ingest import OrangeType, PriceBar

logger = logging.getLogger(__name__)

__all__ = [
    "Scenario",
    "Position",
    "PayoffEstimates",
    "Recommendation",
    "estimate_payoffs",
    "bootstrap_median_magnitude",
    "emv",
    "recommend",
    "payoffs_to_json_dict",
    "payoffs_from_json_dict",
    "recommendation_to_json_dict",
]

CONTRACT_LBS = 15000

EXIT_MONTH = {OrangeType.NON_VALENCIA: 3, OrangeType.VALENCIA: 5}


class Scenario(str, Enum):
    """Forecast-quality scenarios split by the exceedance probability."""

    A_OVERESTIMATE = "A_Overestimate"
    B_UNDERESTIMATE = "B_Underestimate"
    C_CLOSE = "C_Close"


class Position(str, Enum):
    LONG = "Long"
    SHORT = "Short"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class PayoffEstimates:
    """Typical futures gains for each direction, in cents/lb and dollars
    per contract."""

    orange_type: OrangeType
    e_long_cents_per_lb: float
    e_short_cents_per_lb: float
    e_long_per_contract: float
    e_short_per_contract: float
    n_positive_years: int
    n_negative_years: int
    b: int
    seed: int
    contract_lbs: int = CONTRACT_LBS
    skipped_years: tuple[tuple[int, str], ...] = ()
    flags: tuple[str, ...] = ()


def cents_to_dollars_per_contract(
    cents_per_lb: float, contract_lbs: int = CONTRACT_LBS
) -> float:
    """Contract value of a cents-per-pound move."""
    return cents_per_lb * contract_lbs / 100.0


def bootstrap_median_magnitude(
    values: Sequence[float], b: int, rng: np.random.Generator
) -> float:
    """Absolute mean of B bootstrapped medians; 0 for an empty series.

    Draws the full (B, n) resampling index matrix in one ``integers``
    call so the stream is reproducible from the generator state.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    idx = rng.integers(0, v.size, size=(b, v.size))
    medians = np.median(v[idx], axis=1)
    return float(abs(medians.mean()))


def estimate_payoffs(
    prices: Iterable[PriceBar],
    forecast_dates: Sequence[date],
    orange_type: OrangeType,
    b: int = 1000,
    seed: int = 0,
    contract_lbs: int = CONTRACT_LBS,
) -> PayoffEstimates:
    """Estimate typical long/short payoffs from historical announcements.

    Each announcement date contributes one move: exit-month mean close
    minus the first close at or after the announcement. Years without an
    entry bar or without exit-month bars are skipped with a recorded
    reason. The positive and negative series each use their own spawned
    child of the root seed (positive first), so estimates do not shift
    when the other side changes.
    """
    if b < 1:
        raise ValidationError("b must be positive")
    if contract_lbs <= 0:
        raise ValidationError("contract_lbs must be positive")
    bars = sorted(prices, key=lambda bar: bar.date)
    if not bars:
        raise ValidationError("no price history")
    orange_type = OrangeType(orange_type)
    exit_month = EXIT_MONTH[orange_type]
    dates = [bar.date for bar in bars]

    moves: list[float] = []
    skipped: list[tuple[int, str]] = []
    for f in sorted(forecast_dates):
        i = np.searchsorted(np.array(dates, dtype="datetime64[D]"), np.datetime64(f))
        if i >= len(bars):
            skipped.append((f.year, "no close on or after the announcement"))
            continue
        entry = bars[i].close_cents_per_lb
        exit_year = f.year + 1
        exits = [
            bar.close_cents_per_lb
            for bar in bars
            if bar.date.year == exit_year and bar.date.month == exit_month
        ]
        if not exits:
            skipped.append(
                (f.year, f"no closes in exit month {exit_year}-{exit_month:02d}")
            )
            continue
        moves.append(float(np.mean(exits)) - entry)

    positives = [m for m in moves if m > 0]
    negatives = [m for m in moves if m < 0]

    child_pos, child_neg = np.random.SeedSequence(seed).spawn(2)
    e_long = bootstrap_median_magnitude(
        positives, b, np.random.default_rng(child_pos)
    )
    e_short = bootstrap_median_magnitude(
        negatives, b, np.random.default_rng(child_neg)
    )

    flags = []
    if not positives:
        flags.append("no_positive_moves")
    if not negatives:
        flags.append("no_negative_moves")
    for year, reason in skipped:
        logger.info("payoff year %d skipped: %s", year, reason)

    return PayoffEstimates(
        orange_type=orange_type,
        e_long_cents_per_lb=e_long,
        e_short_cents_per_lb=e_short,
        e_long_per_contract=cents_to_dollars_per_contract(e_long, contract_lbs),
        e_short_per_contract=cents_to_dollars_per_contract(e_short, contract_lbs),
        n_positive_years=len(positives),
        n_negative_years=len(negatives),
        b=b,
        seed=seed,
        contract_lbs=contract_lbs,
        skipped_years=tuple(skipped),
        flags=tuple(flags),
    )


def emv(branches: Sequence[tuple[float, float]]) -> float:
    """Expected monetary value of (probability, payoff) branches.

    Probabilities must be nonnegative and sum to at most 1 (within 1e-9);
    a sub-unit total leaves the remainder on an implicit zero-payoff
    branch.
    """
    total = 0.0
    p_sum = 0.0
    for p, payoff in branches:
        if not math.isfinite(p) or p < 0.0:
            raise ValidationError(f"bad branch probability {p!r}")
        if not math.isfinite(payoff):
            raise ValidationError(f"bad branch payoff {payoff!r}")
        p_sum += p
        total += p * payoff
    if p_sum > 1.0 + 1e-9:
        raise ValidationError(f"branch probabilities sum to {p_sum}, beyond 1")
    return total


@dataclass(frozen=True)
class Recommendation:
    scenario: Scenario
    position: Position
    p_exceed: float
    tau: float
    emv_long: float
    emv_short: float
    tilt: str
    action_farmer: str
    action_processor: str
    rationale: str
    flags: tuple[str, ...] = ()


_FARMER_ACTIONS = {
    Scenario.A_OVERESTIMATE: (
        "Prices are likely to strengthen as the shortfall becomes known: "
        "hold off locking in a sale price, plan to sell later at the spot "
        "market, and consider writing put options to collect premium."
    ),
    Scenario.B_UNDERESTIMATE: (
        "Prices are likely to soften as extra supply becomes known: protect "
        "revenue now by buying put options or taking a short futures hedge."
    ),
    Scenario.C_CLOSE: (
        "Prices should stay near current levels: keep routine downside "
        "protection with put options or a light short hedge, or simply wait "
        "for the spot market."
    ),
}

_PROCESSOR_ACTIONS = {
    Scenario.A_OVERESTIMATE: (
        "Fruit will be scarcer than the forecast says: secure supply before "
        "prices rise by taking a long position in futures or buying call "
        "options, and lock contracted volumes early."
    ),
    Scenario.B_UNDERESTIMATE: (
        "Fruit will be more plentiful than the forecast says: contract only "
        "a minimum supply floor, buy the remainder at the spot market, and "
        "consider selling call options or holding a short futures position."
    ),
    Scenario.C_CLOSE: (
        "The forecast looks reliable: contract a safety level of supply at "
        "current prices and source the rest from the spot market as needed."
    ),
}


def recommend(
    dist: ErrorDistribution,
    payoffs: PayoffEstimates,
    tau: float = 5.0,
    p_high: float = 0.9,
    p_low: float = 0.1,
    tilt: Tilt | str = Tilt.NO_TILT,
) -> Recommendation:
    """Turn an error distribution and payoff estimates into a hedge.

    Scenario A (the forecast very likely overestimates) needs
    ``p_exceed >= p_high``; scenario B needs ``p_exceed <= p_low``;
    anything between is scenario C. The trading position maximizes EMV
    against staying out of the market; exact ties go to Neutral. A
    raises-overestimation outlook tilt near scenario C is advisory only,
    never a position change.
    """
    if not (0.0 <= p_low < p_high <= 1.0):
        raise ValidationError(
            f"need 0 <= p_low < p_high <= 1, got p_low={p_low}, p_high={p_high}"
        )
    tilt = Tilt(tilt)
    p = exceedance_probability(dist, tau)

    if p >= p_high:
        scenario = Scenario.A_OVERESTIMATE
    elif p <= p_low:
        scenario = Scenario.B_UNDERESTIMATE
    else:
        scenario = Scenario.C_CLOSE

    up = payoffs.e_long_per_contract
    down = payoffs.e_short_per_contract
    # long gains the typical rise with prob p, loses the typical fall otherwise
    emv_long = emv([(p, up), (1.0 - p, -down)])
    emv_short = emv([(1.0 - p, down), (p, -up)])

    best = max(emv_long, emv_short, 0.0)
    ties = sum(1 for v in (emv_long, emv_short, 0.0) if v == best)
    if ties > 1:
        position = Position.NEUTRAL
    elif best == emv_long:
        position = Position.LONG
    elif best == emv_short:
        position = Position.SHORT
    else:
        position = Position.NEUTRAL

    flags = []
    if dist.degenerate:
        flags.append("degenerate_distribution")

    parts = [
        f"Estimated probability {p:.3f} that the error exceeds {tau:g}% puts "
        f"this season in scenario {scenario.value.split('_')[0]}.",
        f"Expected value per contract: {emv_long:,.2f} long vs "
        f"{emv_short:,.2f} short; {position.value.lower()} is preferred.",
    ]
    if scenario is Scenario.C_CLOSE and tilt is Tilt.RAISES_OVERESTIMATION:
        parts.append(
            "The seasonal outlook leans toward conditions that raise "
            "overestimation risk; treat long-side arguments a little more "
            "favorably, though this does not change the recommended position."
        )
        flags.append("tilt_advisory")
    elif tilt is Tilt.LOWERS_OVERESTIMATION:
        parts.append(
            "The seasonal outlook leans against overestimation; no position "
            "change, advisory only."
        )
    elif tilt is Tilt.UNKNOWN:
        parts.append("The seasonal outlook is uninformative for this model.")

    return Recommendation(
        scenario=scenario,
        position=position,
        p_exceed=p,
        tau=tau,
        emv_long=emv_long,
        emv_short=emv_short,
        tilt=tilt.value,
        action_farmer=_FARMER_ACTIONS[scenario],
        action_processor=_PROCESSOR_ACTIONS[scenario],
        rationale=" ".join(parts),
        flags=tuple(flags),
    )


def payoffs_to_json_dict(p: PayoffEstimates) -> dict:
    return {
        "orange_type": p.orange_type.value,
        "e_long_cents_per_lb": p.e_long_cents_per_lb,
        "e_short_cents_per_lb": p.e_short_cents_per_lb,
        "e_long_per_contract": p.e_long_per_contract,
        "e_short_per_contract": p.e_short_per_contract,
        "n_positive_years": p.n_positive_years,
        "n_negative_years": p.n_negative_years,
        "B": p.b,
        "seed": p.seed,
        "contract_lbs": p.contract_lbs,
        "skipped_years": [[y, r] for y, r in p.skipped_years],
        "flags": list(p.flags),
    }


def payoffs_from_json_dict(doc: Mapping) -> PayoffEstimates:
    try:
        return PayoffEstimates(
            orange_type=OrangeType(doc["orange_type"]),
            e_long_cents_per_lb=float(doc["e_long_cents_per_lb"]),
            e_short_cents_per_lb=float(doc["e_short_cents_per_lb"]),
            e_long_per_contract=float(doc["e_long_per_contract"]),
            e_short_per_contract=float(doc["e_short_per_contract"]),
            n_positive_years=int(doc["n_positive_years"]),
            n_negative_years=int(doc["n_negative_years"]),
            b=int(doc["B"]),
            seed=int(doc["seed"]),
            contract_lbs=int(doc.get("contract_lbs", CONTRACT_LBS)),
            skipped_years=tuple(
                (int(y), str(r)) for y, r in doc.get("skipped_years", [])
            ),
            flags=tuple(doc.get("flags", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed payoff document: {exc}") from None


def save_payoffs(p: PayoffEstimates, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payoffs_to_json_dict(p), fh, indent=2)
        fh.write("\n")


def load_payoffs(path) -> PayoffEstimates:
    with open(path, "r", encoding="utf-8") as fh:
        return payoffs_from_json_dict(json.load(fh))


def recommendation_to_json_dict(r: Recommendation) -> dict:
    return {
        "scenario": r.scenario.value,
        "position": r.position.value,
        "p_exceed": r.p_exceed,
        "tau": r.tau,
        "emv_long": r.emv_long,
        "emv_short": r.emv_short,
        "tilt": r.tilt,
        "actions": {"farmer": r.action_farmer, "processor": r.action_processor},
        "rationale": r.rationale,
        "flags": list(r.flags),
    }


def save_recommendation(r: Recommendation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(recommendation_to_json_dict(r), fh, indent=2)
        fh.write("\n")
