"""Multivariate local polynomial regression with nearest-neighbor bandwidth.

The estimator fits a separate weighted polynomial around every query
point. Distances are Euclidean in standardized predictor space; the
bandwidth at a query is the distance to its ceil(alpha*n)-th nearest
training point, and points inside the bandwidth are weighted by the
tricube kernel

    w(d) = (1 - (d/h)^3)^3   for d < h, else 0.

The prediction is the local intercept of the weighted least-squares
polynomial centered at the query. Because each fitted value is a linear
combination of the training responses, the fit has an explicit hat
matrix, whose trace prices model complexity in the generalized
cross-validation score

    GCV = n * RSS / (n - tr(L))^2.

Model search evaluates candidate predictor subsets over a grid of alpha
values and ranks them by GCV.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import as_float_matrix, as_float_vector, check_matching_lengths
from .errors import ConfigError, NumericalError, ValidationError
from .ingest import OrangeType

logger = logging.getLogger(__name__)

__all__ = [
    "LocalPolynomialRegression",
    "gcv_score",
    "gcv",
    "GcvRow",
    "GcvTable",
    "enumerate_models",
    "DEFAULT_ALPHA_GRID",
    "ModelPreset",
    "PRESETS",
    "get_preset",
    "model_to_json_dict",
    "model_from_json_dict",
    "save_model",
    "load_model",
]

DEFAULT_ALPHA_GRID: tuple[float, ...] = (
    0.50,
    0.55,
    0.60,
    0.65,
    0.70,
    0.75,
    0.80,
    0.85,
    0.90,
    0.95,
    1.0,
)

MIN_TRAINING_POINTS = 5


def _neighbor_count(alpha: float, n: int) -> int:
    """k = ceil(alpha*n), guarded against float roundoff pushing an exact
    integer product over the next boundary."""
    k = math.ceil(alpha * n - 1e-9)
    return min(n, max(1, k))


def tricube_weights(distances: np.ndarray, bandwidth: float) -> np.ndarray:
    """Tricube kernel weights; zero at and beyond the bandwidth."""
    if bandwidth <= 0:
        raise ValidationError("bandwidth must be positive")
    u = distances / bandwidth
    w = np.zeros_like(u)
    inside = u < 1.0
    w[inside] = (1.0 - u[inside] ** 3) ** 3
    return w


class LocalPolynomialRegression(BaseEstimator, RegressorMixin):
    """Locally weighted polynomial regression (degree 1 or 2).

    Parameters
    ----------
    alpha : float
        Nearest-neighbor bandwidth fraction in (0, 1]. The local
        neighborhood holds ceil(alpha * n) training points.
    degree : int
        Local polynomial degree; 2 adds squares and pairwise products.

    Attributes (after fit)
    ----------------------
    columns_ : list of str            predictor names
    fitted_ : ndarray (n,)            leave-nothing-out fitted values
    residuals_ : ndarray (n,)         y - fitted_
    hat_matrix_ : ndarray (n, n)      rows are hat vectors l(x_i)
    hat_trace_ : float                sum of leverages, in [1, n] normally
    gcv_ : float                      GCV score (inf when tr(L) >= n)
    fallback_points_ : list of int    rows where locally dependent basis
                                      columns had to be dropped before
                                      solving

    Notes
    -----
    Continuous predictors are standardized to zero mean and unit
    variance using training statistics; binary 0/1 columns enter raw.
    Columns constant in training are kept for distances but excluded
    from the polynomial basis (their centered value is identically
    zero). When several training points coincide with a query
    (bandwidth zero), the prediction is the plain mean of the
    coincident responses.
    """

    def __init__(self, alpha: float = 0.7, degree: int = 1):
        self.alpha = alpha
        self.degree = degree

    def _check_params(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha!r}")
        if self.degree not in (1, 2):
            raise ValidationError(f"degree must be 1 or 2, got {self.degree!r}")

    def fit(self, X, y, columns: Sequence[str] | None = None):
        self._check_params()
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        check_matching_lengths(X, y)
        n, p = X.shape
        if n < MIN_TRAINING_POINTS:
            raise ValidationError(
                f"need at least {MIN_TRAINING_POINTS} training points, got {n}"
            )
        if columns is not None and len(columns) != p:
            raise ValidationError("column names do not match predictor count")

        self.columns_ = (
            list(columns) if columns is not None else [f"x{j}" for j in range(p)]
        )
        self.X_ = X.copy()
        self.y_ = y.copy()
        self.n_ = n
        self.p_ = p

        self.binary_ = np.array(
            [bool(np.all(np.isin(X[:, j], (0.0, 1.0)))) for j in range(p)]
        )
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        self.constant_ = scale == 0.0
        mean[self.binary_] = 0.0
        scale[self.binary_] = 1.0
        scale[scale == 0.0] = 1.0
        self.x_mean_ = mean
        self.x_scale_ = scale
        self.Z_ = (X - mean) / scale
        self.basis_columns_ = np.flatnonzero(~self.constant_)

        k = _neighbor_count(self.alpha, n)
        if k < self._basis_size() + 1:
            logger.warning(
                "neighborhood of %d points is small for a %d-term local basis; "
                "expect reduced local fits",
                k,
                self._basis_size(),
            )
        self.k_ = k

        hat = np.zeros((n, n))
        fitted = np.zeros(n)
        fallback: list[int] = []
        for i in range(n):
            value, row, used_fallback = self._local_fit(self.Z_[i])
            fitted[i] = value
            hat[i] = row
            if used_fallback:
                fallback.append(i)

        self.hat_matrix_ = hat
        self.hat_diag_ = np.diag(hat).copy()
        self.hat_trace_ = float(self.hat_diag_.sum())
        self.fitted_ = fitted
        self.residuals_ = y - fitted
        self.fallback_points_ = fallback
        rss = float(self.residuals_ @ self.residuals_)
        self.rss_ = rss
        self.gcv_ = gcv_score(n, rss, self.hat_trace_)
        self.gcv_degenerate_ = not math.isfinite(self.gcv_)
        if fallback:
            logger.warning(
                "local basis reduced at %d of %d points (columns constant or "
                "dependent within the neighborhood)",
                len(fallback),
                n,
            )
        return self

    def _basis_size(self) -> int:
        m = len(getattr(self, "basis_columns_", []))
        if self.degree == 1:
            return 1 + m
        return 1 + 2 * m + m * (m - 1) // 2

    def _basis(self, dz: np.ndarray) -> np.ndarray:
        """Centered polynomial basis at offsets dz (rows)."""
        cols = [np.ones(dz.shape[0])]
        use = dz[:, self.basis_columns_]
        for j in range(use.shape[1]):
            cols.append(use[:, j])
        if self.degree == 2:
            for j in range(use.shape[1]):
                cols.append(use[:, j] ** 2)
            for a in range(use.shape[1]):
                for b in range(a + 1, use.shape[1]):
                    cols.append(use[:, a] * use[:, b])
        return np.column_stack(cols)

    def _local_fit(self, z0: np.ndarray) -> tuple[float, np.ndarray, bool]:
        """Fit around one standardized query; returns (value, hat row,
        fallback flag)."""
        dz = self.Z_ - z0
        d = np.sqrt(np.einsum("ij,ij->i", dz, dz))
        h = float(np.partition(d, self.k_ - 1)[self.k_ - 1])

        n = self.n_
        row = np.zeros(n)
        if h == 0.0:
            # query coincides with its whole neighborhood
            at = d == 0.0
            row[at] = 1.0 / at.sum()
            return float(row @ self.y_), row, False

        w = tricube_weights(d, h)
        active = np.flatnonzero(w > 0.0)
        sw = np.sqrt(w[active])
        A = self._basis(dz[active]) * sw[:, None]
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
        tol = S[0] * max(A.shape) * np.finfo(float).eps if S.size else 0.0
        rank = int(np.sum(S > tol))

        if rank < A.shape[1]:
            # Locally dependent basis columns (an indicator constant over
            # the neighborhood, say) are dropped in basis order and the
            # reduced system solved instead; when only the intercept
            # survives this degrades to the weighted neighborhood mean.
            kept = [0]
            for j in range(1, A.shape[1]):
                trial = A[:, kept + [j]]
                s = np.linalg.svd(trial, compute_uv=False)
                t = s[0] * max(trial.shape) * np.finfo(float).eps
                if int(np.sum(s > t)) == len(kept) + 1:
                    kept.append(j)
            U, S, Vt = np.linalg.svd(A[:, kept], full_matrices=False)
            c = Vt[:, 0] / S
            row[active] = (U @ c) * sw
            return float(row @ self.y_), row, True

        # hat vector of the local intercept: sw * (U diag(1/S) V^T e1)
        c = Vt[:, 0] / S
        row[active] = (U @ c) * sw
        return float(row @ self.y_), row, False

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean_) / self.x_scale_

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "Z_"):
            raise ValidationError("model is not fitted; call fit() first")
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.p_:
            raise ValidationError(
                f"expected {self.p_} predictors, got {X.shape[1]}"
            )
        Z0 = self._standardize(X)
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            value, _, _ = self._local_fit(Z0[i])
            out[i] = value
        return out

    def predict_one(self, x0) -> float:
        return float(self.predict(np.asarray(x0, dtype=float).reshape(1, -1))[0])

    def neighborhood(self, x0) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the k nearest training points to x0 and their tricube
        weights (uniform over coincident points when the bandwidth is zero).

        Ties at the neighborhood boundary resolve by training row order.
        """
        if not hasattr(self, "Z_"):
            raise ValidationError("model is not fitted; call fit() first")
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape[0] != self.p_:
            raise ValidationError(f"expected {self.p_} predictors in x0")
        z0 = self._standardize(x0)
        dz = self.Z_ - z0
        d = np.sqrt(np.einsum("ij,ij->i", dz, dz))
        idx = np.argsort(d, kind="stable")[: self.k_]
        h = float(d[idx[-1]])
        if h == 0.0:
            w = np.ones(len(idx))
        else:
            w = tricube_weights(d[idx], h)
            if w.sum() == 0.0:  # every neighbor sits exactly on the boundary
                w = np.ones(len(idx))
        return idx, w


def gcv_score(n: int, rss: float, hat_trace: float) -> float:
    """Generalized cross-validation score n*RSS/(n - tr(L))^2.

    A trace at or beyond n leaves no residual degrees of freedom; the
    score degenerates to +inf rather than rewarding interpolation.
    """
    if n <= 0:
        raise ValidationError("n must be positive")
    if rss < 0:
        raise ValidationError("rss cannot be negative")
    denom = n - hat_trace
    if denom <= 0:
        return math.inf
    return n * rss / (denom * denom)


def gcv(model: LocalPolynomialRegression) -> float:
    """GCV of a fitted model (computed at fit time)."""
    if not hasattr(model, "gcv_"):
        raise ValidationError("model is not fitted; call fit() first")
    return model.gcv_


@dataclass
class GcvRow:
    """One evaluated predictor subset."""

    mask: tuple[int, ...]
    predictors: tuple[str, ...]
    alpha: float
    gcv: float
    n: int
    degenerate: bool = False


@dataclass
class GcvTable:
    """Model-search results over predictor subsets and bandwidths."""

    variables: list[str]
    rows: list[GcvRow]
    best_index: int
    mode: str
    degree: int
    alpha_grid: tuple[float, ...]
    skipped: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def best(self) -> GcvRow:
        return self.rows[self.best_index]

    def to_csv(self, path) -> None:
        """One indicator column per variable plus alpha and gcv."""
        import csv

        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*self.variables, "alpha", "gcv"])
            for row in self.rows:
                w.writerow([*row.mask, repr(row.alpha), repr(row.gcv)])


def _fit_subset(
    X: np.ndarray,
    y: np.ndarray,
    columns: list[str],
    subset: Sequence[str],
    alpha: float,
    degree: int,
) -> LocalPolynomialRegression:
    idx = [columns.index(c) for c in subset]
    model = LocalPolynomialRegression(alpha=alpha, degree=degree)
    return model.fit(X[:, idx], y, columns=list(subset))


def enumerate_models(
    X,
    y,
    columns: Sequence[str],
    mandatory: Sequence[str] = (),
    optional: Sequence[str] | None = None,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    degree: int = 1,
    mode: str = "drop-one",
    fixed_alpha: float | None = None,
) -> GcvTable:
    """Rank predictor subsets by GCV.

    Every subset is evaluated on the identical rows of ``X`` so scores
    are comparable. In ``drop-one`` mode the rows are: for each optional
    variable, taken last to first, the model leaving out that one
    variable; then the full model. ``power-set`` mode evaluates mandatory
    plus every subset of the optional variables (counted in binary with
    optional[0] as the low bit). Mandatory variables appear in every row.
    Empty candidate sets are skipped with a recorded reason.

    Per row the bandwidth either sweeps ``alpha_grid`` keeping the
    smallest GCV (ties to the larger alpha) or is pinned by
    ``fixed_alpha``. Best row: smallest GCV, ties to fewer predictors,
    then larger alpha, then earlier row.
    """
    X = as_float_matrix(X, "X")
    y = as_float_vector(y, "y")
    check_matching_lengths(X, y)
    columns = list(columns)
    if len(columns) != X.shape[1]:
        raise ValidationError("column names do not match predictor count")
    mandatory = list(mandatory)
    optional = list(optional) if optional is not None else [
        c for c in columns if c not in mandatory
    ]
    for name in (*mandatory, *optional):
        if name not in columns:
            raise ValidationError(f"unknown variable {name!r}")
    overlap = set(mandatory) & set(optional)
    if overlap:
        raise ValidationError(
            "variables both mandatory and optional: " + ", ".join(sorted(overlap))
        )
    if mode not in ("drop-one", "power-set"):
        raise ValidationError(f"unknown enumeration mode {mode!r}")
    if fixed_alpha is None and not alpha_grid:
        raise ValidationError("alpha grid is empty")

    variables = mandatory + optional

    subsets: list[list[str]] = []
    if mode == "drop-one":
        for i in range(len(optional) - 1, -1, -1):
            subsets.append(mandatory + optional[:i] + optional[i + 1 :])
        subsets.append(mandatory + optional)
    else:
        for s in range(2 ** len(optional)):
            chosen = [optional[i] for i in range(len(optional)) if s >> i & 1]
            subsets.append(mandatory + chosen)

    alphas = [fixed_alpha] if fixed_alpha is not None else list(alpha_grid)

    rows: list[GcvRow] = []
    skipped: list[tuple[tuple[int, ...], str]] = []
    seen: set[tuple[str, ...]] = set()
    for subset in subsets:
        key = tuple(subset)
        mask = tuple(1 if v in subset else 0 for v in variables)
        if not subset:
            skipped.append((mask, "empty predictor set"))
            continue
        if key in seen:  # drop-one over duplicated names could repeat
            skipped.append((mask, "duplicate subset"))
            continue
        seen.add(key)
        best: tuple[float, float] | None = None  # (gcv, alpha)
        for a in alphas:
            fit = _fit_subset(X, y, columns, subset, a, degree)
            score = fit.gcv_
            if best is None or score < best[0] or (score == best[0] and a > best[1]):
                best = (score, a)
        score, a = best
        rows.append(
            GcvRow(
                mask=mask,
                predictors=key,
                alpha=a,
                gcv=score,
                n=X.shape[0],
                degenerate=not math.isfinite(score),
            )
        )

    if not rows:
        raise ValidationError("no candidate subsets to evaluate")

    order = sorted(
        range(len(rows)),
        key=lambda i: (rows[i].gcv, len(rows[i].predictors), -rows[i].alpha, i),
    )
    return GcvTable(
        variables=variables,
        rows=rows,
        best_index=order[0],
        mode=mode,
        degree=degree,
        alpha_grid=tuple(alphas),
        skipped=skipped,
    )


@dataclass(frozen=True)
class ModelPreset:
    """A named, ready-to-fit model configuration."""

    name: str
    orange_type: OrangeType
    phase: str
    predictors: tuple[str, ...]
    alpha: float
    degree: int = 1


PRESETS: dict[str, ModelPreset] = {
    p.name: p
    for p in (
        ModelPreset(
            "nonvalencia_cluster",
            OrangeType.NON_VALENCIA,
            "pre",
            ("Freezes", "Hurricanes", "C3_Jan4c"),
            0.65,
        ),
        ModelPreset(
            "nonvalencia_station",
            OrangeType.NON_VALENCIA,
            "pre",
            ("Freezes", "Hurricanes", "Collier_Jan4c"),
            0.65,
        ),
        ModelPreset(
            "valencia_cluster",
            OrangeType.VALENCIA,
            "pre",
            ("Freezes", "Hurricanes", "Cg", "C1_FMAQ75"),
            0.70,
        ),
        ModelPreset(
            "valencia_station",
            OrangeType.VALENCIA,
            "pre",
            ("Freezes", "Hurricanes", "Cg", "IndianRiver_MayQ75"),
            0.70,
        ),
        ModelPreset(
            "nonvalencia_post",
            OrangeType.NON_VALENCIA,
            "post",
            ("Freezes", "Hurricanes", "C2_Dec4c"),
            0.65,
        ),
        ModelPreset(
            "valencia_post",
            OrangeType.VALENCIA,
            "post",
            ("Freezes", "Hurricanes", "Cg", "C3_Dec4c"),
            0.70,
        ),
    )
}


def get_preset(name: str) -> ModelPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def model_to_json_dict(
    model: LocalPolynomialRegression, meta: Mapping | None = None
) -> dict:
    """Self-contained model document: configuration, standardization, and
    the training data needed to reproduce the fit exactly."""
    if not hasattr(model, "Z_"):
        raise ValidationError("model is not fitted; call fit() first")
    doc = {
        "predictors": list(model.columns_),
        "alpha": model.alpha,
        "degree": model.degree,
        "standardization": {
            "mean": [float(v) for v in model.x_mean_],
            "scale": [float(v) for v in model.x_scale_],
            "binary": [bool(b) for b in model.binary_],
        },
        "training": {
            "x": [[float(v) for v in row] for row in model.X_],
            "y": [float(v) for v in model.y_],
        },
        "gcv": model.gcv_ if math.isfinite(model.gcv_) else None,
        "hat_trace": model.hat_trace_,
    }
    if meta:
        doc["meta"] = dict(meta)
    return doc


def model_from_json_dict(doc: Mapping) -> LocalPolynomialRegression:
    """Refit from a stored document; deterministic, so the reloaded model
    reproduces fitted values and GCV bit for bit."""
    try:
        predictors = list(doc["predictors"])
        alpha = float(doc["alpha"])
        degree = int(doc["degree"])
        X = np.asarray(doc["training"]["x"], dtype=float)
        y = np.asarray(doc["training"]["y"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from None
    model = LocalPolynomialRegression(alpha=alpha, degree=degree)
    model.fit(X, y, columns=predictors)
    meta = doc.get("meta")
    if meta:
        model.meta_ = dict(meta)
    return model


def save_model(model: LocalPolynomialRegression, path, meta=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json_dict(model, meta), fh, indent=2)
        fh.write("\n")


def load_model(path) -> LocalPolynomialRegression:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json_dict(json.load(fh))
