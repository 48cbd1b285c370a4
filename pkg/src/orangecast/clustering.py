"""Grouping counties by the shape of their yield history.

Counties with similar yield trajectories respond to weather shocks
together, so cluster-mean climate predictors are less noisy than any
single station. Series are z-scored per county before clustering so the
grouping follows shape, not level.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import as_float_matrix
from .errors import ParseError, ValidationError
from .features import (
    FLAG_IMPUTED,
    FLAG_MISSING,
    FLAG_OK,
    INDICATOR_COLUMNS,
    PredictorMatrix,
)

logger = logging.getLogger(__name__)

__all__ = [
    "TimeSeriesKMeans",
    "ClusterAssignment",
    "cluster_counties",
    "aggregate_cluster_features",
    "load_county_yields",
    "write_cluster_assignment",
    "read_cluster_assignment",
]


class TimeSeriesKMeans(BaseEstimator, ClusterMixin):
    """Plain Lloyd k-means with deterministic farthest-point seeding.

    Each restart seeds its first centroid uniformly at random, then adds
    the point farthest from its nearest chosen centroid (ties to the
    lowest row index). The best restart by final inertia wins; equal
    inertia keeps the earliest restart. ``inertia_trace_`` records the
    assignment-step inertia of the winning restart per iteration and is
    nonincreasing.

    Parameters
    ----------
    n_clusters : int
        Number of clusters k.
    seed : int
        Root seed; restart r draws from the r-th spawned child stream.
    restarts : int
        Independent initializations to try.
    max_iter : int
        Lloyd iteration cap per restart.
    tol : float
        Stop when no centroid moves more than this (Euclidean).
    """

    def __init__(self, n_clusters=4, seed=0, restarts=10, max_iter=300, tol=1e-9):
        self.n_clusters = n_clusters
        self.seed = seed
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        n = X.shape[0]
        k = self.n_clusters
        if k < 1:
            raise ValidationError("n_clusters must be at least 1")
        if n < k:
            raise ValidationError(f"{n} series cannot form {k} clusters")
        if self.restarts < 1:
            raise ValidationError("restarts must be at least 1")

        children = np.random.SeedSequence(self.seed).spawn(self.restarts)
        best = None
        for r in range(self.restarts):
            rng = np.random.default_rng(children[r])
            labels, centers, inertia, trace, iters = self._lloyd(X, k, rng)
            if best is None or inertia < best[2]:
                best = (labels, centers, inertia, trace, iters)

        self.labels_, self.cluster_centers_, self.inertia_, trace, iters = best
        self.inertia_trace_ = trace
        self.n_iter_ = iters
        return self

    @staticmethod
    def _sq_dists(X, centers):
        # (n, k) squared Euclidean distances
        diff = X[:, None, :] - centers[None, :, :]
        return np.einsum("nkd,nkd->nk", diff, diff)

    def _init_centers(self, X, k, rng):
        n = X.shape[0]
        first = int(rng.integers(n))
        chosen = [first]
        d2 = np.einsum("nd,nd->n", X - X[first], X - X[first])
        while len(chosen) < k:
            nxt = int(np.argmax(d2))  # argmax takes the lowest index on ties
            chosen.append(nxt)
            cand = np.einsum("nd,nd->n", X - X[nxt], X - X[nxt])
            d2 = np.minimum(d2, cand)
        return X[chosen].copy()

    def _lloyd(self, X, k, rng):
        centers = self._init_centers(X, k, rng)
        trace: list[float] = []
        labels = np.zeros(X.shape[0], dtype=int)
        for it in range(1, self.max_iter + 1):
            d2 = self._sq_dists(X, centers)
            labels = np.argmin(d2, axis=1)
            inertia = float(d2[np.arange(X.shape[0]), labels].sum())
            trace.append(inertia)
            new_centers = centers.copy()
            for j in range(k):
                members = X[labels == j]
                if len(members):
                    new_centers[j] = members.mean(axis=0)
                else:
                    # re-seed an emptied cluster on the globally worst-fit point
                    worst = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                    new_centers[j] = X[worst]
            shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
            centers = new_centers
            if shift <= self.tol:
                break
        d2 = self._sq_dists(X, centers)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(X.shape[0]), labels].sum())
        return labels, centers, inertia, trace, it


@dataclass
class ClusterAssignment:
    """County-to-cluster map with fit diagnostics.

    Cluster ids are C1..Ck ordered by first appearance: C1 is the cluster
    containing the earliest county in input order.
    """

    k: int
    assignment: dict[str, str]
    centroids: np.ndarray
    inertia: float
    inertia_trace: list[float]
    seed: int
    restarts: int
    unscaled_counties: list[str] = field(default_factory=list)

    def members(self, cluster_id: str) -> list[str]:
        return [c for c, cid in self.assignment.items() if cid == cluster_id]

    def cluster_ids(self) -> list[str]:
        return [f"C{i + 1}" for i in range(self.k)]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "ClusterAssignment":
        """Rehydrate a bare county->cluster map (diagnostics left empty)."""
        ks = []
        for cid in mapping.values():
            if not cid.startswith("C") or not cid[1:].isdigit():
                raise ValidationError(f"bad cluster id {cid!r}")
            ks.append(int(cid[1:]))
        if not ks:
            raise ValidationError("empty cluster assignment")
        return cls(
            k=max(ks),
            assignment=dict(mapping),
            centroids=np.empty((0, 0)),
            inertia=float("nan"),
            inertia_trace=[],
            seed=0,
            restarts=0,
        )


def _interpolate_series(
    series: Mapping[int, float], years: Sequence[int]
) -> np.ndarray:
    """Fill missing years by linear interpolation; edges take the nearest
    observed value."""
    obs_years = sorted(y for y in series if series[y] is not None)
    if not obs_years:
        raise ValidationError("county has no observed yield values")
    xp = np.array(obs_years, dtype=float)
    fp = np.array([series[y] for y in obs_years], dtype=float)
    return np.interp(np.array(years, dtype=float), xp, fp)


def cluster_counties(
    yields: Mapping[str, Mapping[int, float]],
    k: int = 4,
    seed: int = 0,
    restarts: int = 10,
) -> ClusterAssignment:
    """Cluster county yield histories into k groups.

    Years are the sorted union across counties; gaps are linearly
    interpolated (nearest value beyond the ends). Constant series cannot
    be z-scored and enter centered but unscaled, with a warning.
    """
    counties = list(yields.keys())
    if k > len(counties):
        raise ValidationError(
            f"k={k} exceeds the {len(counties)} counties available"
        )
    years = sorted({y for s in yields.values() for y in s})
    if not years:
        raise ValidationError("no yield observations")

    rows = []
    unscaled: list[str] = []
    for county in counties:
        v = _interpolate_series(yields[county], years)
        mu = float(v.mean())
        sd = float(v.std())
        if sd == 0.0:
            logger.warning("county %s has a constant yield series; left unscaled", county)
            unscaled.append(county)
            rows.append(v - mu)
        else:
            rows.append((v - mu) / sd)
    X = np.vstack(rows)

    est = TimeSeriesKMeans(n_clusters=k, seed=seed, restarts=restarts).fit(X)

    # relabel clusters by first appearance in input order
    order: list[int] = []
    for lab in est.labels_:
        if lab not in order:
            order.append(int(lab))
    for j in range(k):
        if j not in order:  # clusters that captured no county keep tail ids
            order.append(j)
    rename = {old: f"C{pos + 1}" for pos, old in enumerate(order)}
    assignment = {
        county: rename[int(lab)] for county, lab in zip(counties, est.labels_)
    }
    centroids = est.cluster_centers_[order]

    return ClusterAssignment(
        k=k,
        assignment=assignment,
        centroids=centroids,
        inertia=est.inertia_,
        inertia_trace=list(est.inertia_trace_),
        seed=seed,
        restarts=restarts,
        unscaled_counties=unscaled,
    )


def aggregate_cluster_features(
    matrix: PredictorMatrix, assignment: ClusterAssignment
) -> PredictorMatrix:
    """Average county-scope climate columns into cluster-scope columns.

    A cluster-season cell is the mean over members with observed values;
    if some members are missing it is flagged imputed, if all are missing
    it stays missing. Indicator columns pass through. A county scope
    absent from the assignment is a mapping error.
    """
    scopes = []
    for c in matrix.climate_columns():
        s = matrix.scope_of(c)
        if s not in scopes:
            scopes.append(s)
    unknown = [s for s in scopes if s not in assignment.assignment]
    if unknown:
        raise ValidationError(
            "no cluster assignment for scope: " + ", ".join(unknown)
        )

    features: list[str] = []
    for c in matrix.climate_columns():
        _, _, feat = c.partition("_")
        if feat not in features:
            features.append(feat)

    cluster_ids = assignment.cluster_ids()
    columns = list(INDICATOR_COLUMNS) + [
        f"{cid}_{feat}" for cid in cluster_ids for feat in features
    ]
    n = len(matrix.years)
    values = np.full((n, len(columns)), np.nan)
    flags = np.full((n, len(columns)), FLAG_MISSING, dtype=object)

    for name in INDICATOR_COLUMNS:
        j_src = matrix.columns.index(name)
        j_dst = columns.index(name)
        values[:, j_dst] = matrix.values[:, j_src]
        flags[:, j_dst] = matrix.flags[:, j_src]

    for cid in cluster_ids:
        members = assignment.members(cid)
        for feat in features:
            member_cols = [
                f"{m}_{feat}" for m in members if f"{m}_{feat}" in matrix.columns
            ]
            j_dst = columns.index(f"{cid}_{feat}")
            if not member_cols:
                continue
            sub = np.stack([matrix.column(c) for c in member_cols], axis=1)
            present = ~np.isnan(sub)
            n_present = present.sum(axis=1)
            with np.errstate(invalid="ignore"):
                means = np.nansum(sub, axis=1) / np.where(
                    n_present > 0, n_present, 1
                )
            for i in range(n):
                if n_present[i] == 0:
                    continue
                values[i, j_dst] = means[i]
                flags[i, j_dst] = (
                    FLAG_OK if n_present[i] == len(member_cols) else FLAG_IMPUTED
                )

    out = PredictorMatrix(matrix.years, columns, values, flags, matrix.phase)
    out.dropped_years = list(matrix.dropped_years)
    return out


YIELD_HEADER = ("county", "year", "yield")


def load_county_yields(path) -> dict[str, dict[int, float]]:
    """Load the per-county yield history CSV (county,year,yield)."""
    out: dict[str, dict[int, float]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path, line=1) from None
        if [h.strip() for h in header] != list(YIELD_HEADER):
            raise ParseError(
                f"expected header {','.join(YIELD_HEADER)!r}", path=path, line=1
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(
                    f"expected 3 fields, got {len(row)}", path=path, line=line_no
                )
            county = row[0].strip()
            try:
                year = int(row[1])
            except ValueError:
                raise ParseError(
                    f"bad year {row[1]!r}", path=path, line=line_no
                ) from None
            cell = row[2].strip()
            if cell == "":
                continue  # explicit gap, filled by interpolation later
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"bad yield {cell!r}", path=path, line=line_no
                ) from None
            county_map = out.setdefault(county, {})
            if year in county_map:
                raise ValidationError(
                    f"{path}: line {line_no}: duplicate yield for "
                    f"({county}, {year})"
                )
            county_map[year] = value
    return out


def write_cluster_assignment(assignment: ClusterAssignment, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["county", "cluster_id"])
        for county, cid in assignment.assignment.items():
            w.writerow([county, cid])


def read_cluster_assignment(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["county", "cluster_id"]:
            raise ParseError("expected header 'county,cluster_id'", path=path, line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(
                    f"expected 2 fields, got {len(row)}", path=path, line=line_no
                )
            out[row[0].strip()] = row[1].strip()
    return out
