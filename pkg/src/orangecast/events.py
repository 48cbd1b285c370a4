"""Event-indicator regression and residual screening of climate predictors.

The forecast error is first explained by coarse 0/1 shock indicators
(freeze seasons, hurricane seasons, disease era). What the indicators
cannot explain, the residual, is then screened against candidate climate
predictors with three association measures so the strongest candidates
can enter the local regression stage.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .features import INDICATOR_COLUMNS, PredictorMatrix
from .ingest import EventCalendar

logger = logging.getLogger(__name__)

__all__ = [
    "EventRegressionFit",
    "fit_event_regression",
    "CandidateScreen",
    "ScreeningReport",
    "screen_predictors",
    "pearson_correlation",
    "spearman_correlation",
    "average_ranks",
    "mutual_information",
    "write_screening_report",
    "export_scatter_data",
]

MIN_SCREEN_OVERLAP = 8


@dataclass
class EventRegressionFit:
    """Least-squares fit of percent error on event indicators."""

    years: list[int]
    coefficients: dict[str, float]
    intercept: float
    include_intercept: bool
    fitted: dict[int, float]
    residuals: dict[int, float]
    r_squared: float
    dropped: list[str] = field(default_factory=list)

    def predicted(self, year: int) -> float:
        return self.fitted[year]

    def to_json_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "include_intercept": self.include_intercept,
            "r_squared": self.r_squared,
            "dropped": self.dropped,
            "fitted": {str(y): self.fitted[y] for y in self.years},
            "residuals": {str(y): self.residuals[y] for y in self.years},
        }


def fit_event_regression(
    errors: Mapping[int, float],
    calendar: EventCalendar,
    include_intercept: bool = True,
) -> EventRegressionFit:
    """Regress percent error on the freeze/hurricane/disease indicators.

    Indicator columns that are constant over the sample, or linearly
    dependent on columns already kept, are dropped with a warning and get
    coefficient 0.0. If nothing remains the design is unusable.
    """
    years = sorted(errors)
    if len(years) < 2:
        raise ValidationError("need at least two seasons to fit")
    y = np.array([float(errors[yr]) for yr in years])
    names = list(INDICATOR_COLUMNS)
    cols = {
        "Freezes": np.array([calendar.freezes(yr) for yr in years], dtype=float),
        "Hurricanes": np.array(
            [calendar.hurricanes(yr) for yr in years], dtype=float
        ),
        "Cg": np.array([calendar.cg(yr) for yr in years], dtype=float),
    }

    kept: list[str] = []
    dropped: list[str] = []
    base = [np.ones(len(years))] if include_intercept else []
    design_cols = list(base)
    rank = np.linalg.matrix_rank(np.column_stack(design_cols)) if design_cols else 0
    for name in names:
        trial = np.column_stack(design_cols + [cols[name]])
        trial_rank = np.linalg.matrix_rank(trial)
        if trial_rank > rank:
            kept.append(name)
            design_cols.append(cols[name])
            rank = trial_rank
        else:
            logger.warning(
                "indicator %s is constant or collinear over %d seasons; dropped",
                name,
                len(years),
            )
            dropped.append(name)

    if not kept and not include_intercept:
        raise NumericalError(
            "all indicator columns dropped and no intercept requested"
        )

    X = np.column_stack(design_cols) if design_cols else np.empty((len(years), 0))
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta if X.shape[1] else np.zeros(len(years))
    resid = y - fitted

    intercept = float(beta[0]) if include_intercept else 0.0
    offset = 1 if include_intercept else 0
    coef = {name: 0.0 for name in names}
    for i, name in enumerate(kept):
        coef[name] = float(beta[offset + i])

    ss_res = float(resid @ resid)
    if include_intercept:
        ss_tot = float(np.sum((y - y.mean()) ** 2))
    else:
        ss_tot = float(y @ y)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    return EventRegressionFit(
        years=years,
        coefficients=coef,
        intercept=intercept,
        include_intercept=include_intercept,
        fitted={yr: float(f) for yr, f in zip(years, fitted)},
        residuals={yr: float(r) for yr, r in zip(years, resid)},
        r_squared=r2,
        dropped=dropped,
    )


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def pearson_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValidationError("correlation needs two equal-length samples")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise NumericalError("zero variance in correlation input")
    return float(dx @ dy) / denom


def spearman_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    return pearson_correlation(average_ranks(x), average_ranks(y))


def _equal_frequency_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per value using interior quantile edges; value v falls in
    bin sum(v > edge_j)."""
    qs = [100.0 * i / bins for i in range(1, bins)]
    edges = np.percentile(values, qs)
    idx = np.zeros(len(values), dtype=int)
    for e in edges:
        idx += values > e
    return idx


def mutual_information(
    x: Sequence[float], y: Sequence[float], bins: int = 5
) -> float:
    """Plug-in mutual information (nats) on an equal-frequency grid."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValidationError("mutual information needs two equal-length samples")
    bx = _equal_frequency_bins(x, bins)
    by = _equal_frequency_bins(y, bins)
    n = len(x)
    joint = np.zeros((bins, bins))
    for i, j in zip(bx, by):
        joint[i, j] += 1.0
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for i in range(bins):
        for j in range(bins):
            p = joint[i, j]
            if p > 0.0:
                mi += p * math.log(p / (px[i] * py[j]))
    return max(0.0, mi)


@dataclass
class CandidateScreen:
    """Association of one candidate predictor with the residual."""

    name: str
    n: int
    pearson_r: float | None = None
    spearman_rho: float | None = None
    mi_nats: float | None = None
    status: str = "ok"  # ok | skipped | zero_variance
    reason: str = ""


@dataclass
class ScreeningReport:
    rows: list[CandidateScreen]

    def ranking(self, statistic: str) -> list[str]:
        """Candidate names strongest first; |r| for the correlations, raw
        value for mutual information. Unscreened candidates excluded."""
        keyed = []
        for row in self.rows:
            v = getattr(row, statistic)
            if v is None:
                continue
            strength = v if statistic == "mi_nats" else abs(v)
            keyed.append((-strength, row.name))
        return [name for _, name in sorted(keyed)]


def screen_predictors(
    residuals: Mapping[int, float],
    matrix: PredictorMatrix,
    candidates: Sequence[str] | None = None,
    min_overlap: int = MIN_SCREEN_OVERLAP,
    mi_bins: int = 5,
) -> ScreeningReport:
    """Score each candidate column against the event-regression residuals.

    Pairs with either side missing are deleted per candidate. Candidates
    with fewer than ``min_overlap`` overlapping seasons are skipped;
    zero-variance candidates are flagged instead of scored.
    """
    names = list(candidates) if candidates is not None else matrix.climate_columns()
    rows: list[CandidateScreen] = []
    for name in names:
        col = matrix.column(name)  # raises on unknown column
        pairs = [
            (col[i], residuals[yr])
            for i, yr in enumerate(matrix.years)
            if yr in residuals and not np.isnan(col[i])
        ]
        n = len(pairs)
        if n < min_overlap:
            rows.append(
                CandidateScreen(
                    name,
                    n,
                    status="skipped",
                    reason=f"only {n} overlapping seasons (need {min_overlap})",
                )
            )
            continue
        x = np.array([p[0] for p in pairs])
        eps = np.array([p[1] for p in pairs])
        if float(np.var(x)) == 0.0 or float(np.var(eps)) == 0.0:
            rows.append(
                CandidateScreen(
                    name, n, status="zero_variance", reason="no variation to score"
                )
            )
            continue
        rows.append(
            CandidateScreen(
                name,
                n,
                pearson_r=pearson_correlation(x, eps),
                spearman_rho=spearman_correlation(x, eps),
                mi_nats=mutual_information(x, eps, mi_bins),
            )
        )
    return ScreeningReport(rows=rows)


def write_screening_report(report: ScreeningReport, path) -> None:
    """CSV export: candidate,pearson_r,spearman_rho,mi_nats,n. Skipped
    candidates keep their row with empty statistics."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["candidate", "pearson_r", "spearman_rho", "mi_nats", "n"])
        for row in report.rows:
            w.writerow(
                [
                    row.name,
                    "" if row.pearson_r is None else repr(row.pearson_r),
                    "" if row.spearman_rho is None else repr(row.spearman_rho),
                    "" if row.mi_nats is None else repr(row.mi_nats),
                    row.n,
                ]
            )


def export_scatter_data(
    residuals: Mapping[int, float],
    matrix: PredictorMatrix,
    out_dir,
    candidates: Sequence[str] | None = None,
) -> list[Path]:
    """Per-candidate (value, residual) pairs for external plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(candidates) if candidates is not None else matrix.climate_columns()
    written: list[Path] = []
    for name in names:
        col = matrix.column(name)
        path = out_dir / f"scatter_{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "residual"])
            for i, yr in enumerate(matrix.years):
                if yr in residuals and not np.isnan(col[i]):
                    w.writerow([repr(float(col[i])), repr(float(residuals[yr]))])
        written.append(path)
    return written


def write_event_fit(fit: EventRegressionFit, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit.to_json_dict(), fh, indent=2)
        fh.write("\n")
