"""Bootstrap error distributions around a local-regression point forecast.

Uncertainty at a query point is estimated from the residuals of nearby
training seasons: the same tricube weights that built the point forecast
resample those residuals, so seasons more like the query contribute more
draws. Each bootstrap sample is the point forecast plus one resampled
neighborhood residual.

Random-number convention (needed to reproduce a distribution exactly):
a PCG64 generator seeded with the integer seed draws all B uniforms in
one ``random(B)`` call; sample i picks the neighbor whose cumulative
normalized weight first exceeds u_i (binary search, right bias). Samples
are then sorted ascending.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .localreg import LocalPolynomialRegression

__all__ = [
    "OutlookCategory",
    "Tilt",
    "ErrorDistribution",
    "bootstrap_distribution",
    "exceedance_probability",
    "cdf_points",
    "outlook_tilt",
    "distribution_to_json_dict",
    "distribution_from_json_dict",
    "save_distribution",
    "load_distribution",
]

MIN_BOOTSTRAP_SAMPLES = 100


class OutlookCategory(str, Enum):
    """Seasonal temperature outlook categories as published by the
    climate outlook services."""

    ABOVE_NORMAL = "above_normal"
    NORMAL = "normal"
    BELOW_NORMAL = "below_normal"
    EQUAL_CHANCES = "equal_chances"


class Tilt(str, Enum):
    """Directional reading of an outlook against a fitted model."""

    RAISES_OVERESTIMATION = "raises_overestimation"
    LOWERS_OVERESTIMATION = "lowers_overestimation"
    NO_TILT = "no_tilt"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ErrorDistribution:
    """A sorted bootstrap sample of the forecast percent error."""

    samples: np.ndarray
    point_estimate: float
    b: int
    seed: int
    source_model: str
    season_year: int | None = None
    orange_type: str | None = None
    tilt: str = Tilt.NO_TILT.value
    degenerate: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or len(samples) != self.b:
            raise ValidationError("samples must be a vector of length b")
        if self.b < MIN_BOOTSTRAP_SAMPLES:
            raise ValidationError(
                f"need at least {MIN_BOOTSTRAP_SAMPLES} bootstrap samples"
            )
        if np.any(np.diff(samples) < 0):
            raise ValidationError("samples must be sorted ascending")
        object.__setattr__(self, "samples", samples)


def bootstrap_distribution(
    model: LocalPolynomialRegression,
    x0,
    b: int = 1000,
    seed: int = 0,
    source_model: str = "",
    season_year: int | None = None,
    orange_type: str | None = None,
    tilt: str | Tilt = Tilt.NO_TILT,
) -> ErrorDistribution:
    """Resample neighborhood residuals around the point forecast at x0.

    The k = ceil(alpha*n) nearest training points to x0 contribute their
    training residuals with probability proportional to their tricube
    weight at x0 (uniform if x0 coincides with all of them). All-zero
    neighborhood residuals produce a valid point mass, flagged
    degenerate.
    """
    if b < MIN_BOOTSTRAP_SAMPLES:
        raise ValidationError(
            f"b must be at least {MIN_BOOTSTRAP_SAMPLES}, got {b}"
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if np.any(~np.isfinite(x0)):
        raise ValidationError("x0 contains NaN or infinite entries")
    point = model.predict_one(x0)
    idx, w = model.neighborhood(x0)
    residuals = model.residuals_[idx]

    probs = w / w.sum()
    rng = np.random.default_rng(seed)
    u = rng.random(b)
    cut = np.cumsum(probs)
    cut[-1] = 1.0  # guard the top edge against cumsum roundoff
    picks = np.searchsorted(cut, u, side="right")
    samples = np.sort(point + residuals[picks])

    degenerate = bool(np.all(residuals == 0.0))
    if isinstance(tilt, Tilt):
        tilt = tilt.value
    return ErrorDistribution(
        samples=samples,
        point_estimate=point,
        b=b,
        seed=seed,
        source_model=source_model,
        season_year=season_year,
        orange_type=orange_type,
        tilt=tilt,
        degenerate=degenerate,
    )


def exceedance_probability(dist: ErrorDistribution, tau: float) -> float:
    """Fraction of bootstrap samples strictly above tau."""
    if not math.isfinite(tau):
        raise ValidationError("tau must be finite")
    return float(np.count_nonzero(dist.samples > tau)) / dist.b


def cdf_points(dist: ErrorDistribution) -> list[tuple[float, float]]:
    """Empirical CDF as (sample, rank/B) pairs, ranks 1..B."""
    return [
        (float(s), (i + 1) / dist.b) for i, s in enumerate(dist.samples)
    ]


def outlook_tilt(effect_sign: int | float | str, outlook: OutlookCategory | str) -> Tilt:
    """Direction a seasonal outlook pushes the overestimation risk.

    ``effect_sign`` is the sign of the fitted effect of the outlook's
    variable on the percent error (positive: more cold days raise
    overestimation). A below-normal outlook makes such a variable more
    likely to run high, raising overestimation risk; above-normal lowers
    it. Normal outlooks carry no tilt, equal-chances outlooks carry no
    information at all.
    """
    if isinstance(effect_sign, str):
        token = effect_sign.strip()
        if token in ("+", "positive"):
            sign = 1
        elif token in ("-", "negative"):
            sign = -1
        else:
            raise ValidationError(f"bad effect sign {token!r}")
    else:
        if effect_sign == 0 or not math.isfinite(float(effect_sign)):
            raise ValidationError("effect sign must be nonzero and finite")
        sign = 1 if effect_sign > 0 else -1
    outlook = OutlookCategory(outlook)

    if outlook is OutlookCategory.EQUAL_CHANCES:
        return Tilt.UNKNOWN
    if outlook is OutlookCategory.NORMAL:
        return Tilt.NO_TILT
    raises = (outlook is OutlookCategory.BELOW_NORMAL) == (sign > 0)
    return Tilt.RAISES_OVERESTIMATION if raises else Tilt.LOWERS_OVERESTIMATION


def distribution_to_json_dict(dist: ErrorDistribution) -> dict:
    return {
        "model_id": dist.source_model,
        "season_year": dist.season_year,
        "orange_type": dist.orange_type,
        "point_estimate": dist.point_estimate,
        "B": dist.b,
        "seed": dist.seed,
        "samples": [float(s) for s in dist.samples],
        "tilt": dist.tilt,
        "degenerate": dist.degenerate,
    }


def distribution_from_json_dict(doc: Mapping) -> ErrorDistribution:
    try:
        return ErrorDistribution(
            samples=np.asarray(doc["samples"], dtype=float),
            point_estimate=float(doc["point_estimate"]),
            b=int(doc["B"]),
            seed=int(doc["seed"]),
            source_model=str(doc["model_id"]),
            season_year=doc.get("season_year"),
            orange_type=doc.get("orange_type"),
            tilt=doc.get("tilt", Tilt.NO_TILT.value),
            degenerate=bool(doc.get("degenerate", False)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed distribution document: {exc}") from None


def save_distribution(dist: ErrorDistribution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(distribution_to_json_dict(dist), fh, indent=2)
        fh.write("\n")


def load_distribution(path) -> ErrorDistribution:
    with open(path, "r", encoding="utf-8") as fh:
        return distribution_from_json_dict(json.load(fh))
