"""Chart quality metrics: continuity (CT), trustworthiness (TW) and
scale-optimal Kruskal stress (KS).

CT and TW are rank-based neighborhood preservation scores in [0, 1]
(1 = perfect). With r_A(i, j) the rank of j among all points ordered by
distance from i in space A (nearest distinct point has rank 1):

    TW(X, Z, K) = 1 - 2 / (N*K*(2N - 3K - 1)) *
                  sum_i sum_{j in U_K(i)} (r_X(i, j) - K)

where U_K(i) are the points inside i's K-neighborhood in the chart Z but
outside its K-neighborhood in the ground truth X. CT exchanges the roles of
X and Z. KS measures global shape preservation: the residual of pairwise
chart distances after the least-squares optimal rescaling onto ground-truth
distances, normalized so 0 is perfect and 1 is worst.

Rank ties are broken by ascending datapoint index so all metrics are
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MetricsError

DEFAULT_NEIGHBOR_FRACTION = 0.05


@dataclass(frozen=True)
class MetricsReport:
    """CT/TW/KS values plus the evaluation parameters that produced them."""

    ct: float
    tw: float
    ks: float
    k_used: int
    n_used: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise MetricsError(f"points must have shape (N, d), got {pts.shape}")
    if pts.shape[0] < 2:
        raise MetricsError("need at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise MetricsError("points contain non-finite entries")
    return pts


def rank_matrix(points) -> np.ndarray:
    """N x N integer ranks: entry (i, j) is the rank of j by distance from i
    (nearest distinct point has rank 1). The diagonal is 0 (self excluded);
    distance ties are broken by ascending index.

    Distances are evaluated as exact elementwise Euclidean norms (not the
    Gram-matrix shortcut) so ranks agree bit-for-bit with a naive
    per-pair reference.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    ranks = np.zeros((n, n), dtype=np.int64)
    cols = np.broadcast_to(np.arange(n), (1, n))
    rank_row = np.arange(1, n)[None, :]
    block = max(1, int(4e6) // max(n, 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        dist = np.linalg.norm(pts[start:stop, None, :] - pts[None, :, :], axis=2)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf  # self last
        order = np.lexsort((np.broadcast_to(cols, dist.shape), dist), axis=-1)
        rows = np.arange(start, stop)[:, None]
        ranks[rows, order[:, : n - 1]] = rank_row
    return ranks


def _check_k(k: int, n: int) -> int:
    k = int(k)
    if k < 1 or 2 * k > n:
        raise MetricsError(f"neighborhood size K={k} outside [1, N/2] for N={n}")
    return k


def _rank_penalty_score(r_kept: np.ndarray, r_test: np.ndarray, k: int) -> float:
    """Shared CT/TW kernel: penalize points inside the K-neighborhood under
    ``r_test`` but outside it under ``r_kept``, weighted by how far out they
    are in ``r_kept``."""
    n = r_kept.shape[0]
    mask = (r_test >= 1) & (r_test <= k) & (r_kept > k)
    penalty = int((r_kept[mask] - k).sum())
    norm = 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))
    return 1.0 - norm * penalty


def trustworthiness(x, z, k: int, *, rank_x: np.ndarray | None = None, rank_z: np.ndarray | None = None) -> float:
    """How free the chart is of false neighbors: 1 when every chart
    K-neighborhood is a subset of the true K-neighborhood."""
    x = _as_points(x)
    z = _as_points(z)
    if x.shape[0] != z.shape[0]:
        raise MetricsError("x and z must have the same number of points")
    k = _check_k(k, x.shape[0])
    rx = rank_matrix(x) if rank_x is None else rank_x
    rz = rank_matrix(z) if rank_z is None else rank_z
    return _rank_penalty_score(rx, rz, k)


def continuity(x, z, k: int, *, rank_x: np.ndarray | None = None, rank_z: np.ndarray | None = None) -> float:
    """How completely true neighborhoods survive in the chart; the exact
    role-exchange dual of trustworthiness."""
    x = _as_points(x)
    z = _as_points(z)
    if x.shape[0] != z.shape[0]:
        raise MetricsError("x and z must have the same number of points")
    k = _check_k(k, x.shape[0])
    rx = rank_matrix(x) if rank_x is None else rank_x
    rz = rank_matrix(z) if rank_z is None else rank_z
    return _rank_penalty_score(rz, rx, k)


def _pair_blocks(x: np.ndarray, z: np.ndarray):
    """Yield matching blocks of upper-triangle pairwise distances (d, delta)
    without materializing the full matrices."""
    n = x.shape[0]
    block = max(1, int(2e6) // max(n, 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        dx = np.linalg.norm(x[start:stop, None, :] - x[None, :, :], axis=2)
        dz = np.linalg.norm(z[start:stop, None, :] - z[None, :, :], axis=2)
        mask = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        yield dx[mask], dz[mask]


def kruskal_stress(x, z, *, normalization: str = "truth") -> float:
    """Scale-optimal stress between ground-truth distances d and chart
    distances delta: fits beta minimizing sum((d - beta*delta)^2), then

        KS = sqrt( sum((d - beta*delta)^2) / sum(d^2) )        ("truth")
        KS = sqrt( sum((d - beta*delta)^2) / sum((beta*delta)^2) )  ("fitted")

    A chart with all-identical points has no defined scale; KS is 1 there.
    """
    x = _as_points(x)
    z = _as_points(z)
    if x.shape[0] != z.shape[0]:
        raise MetricsError("x and z must have the same number of points")
    if normalization not in ("truth", "fitted"):
        raise MetricsError(f"unknown normalization {normalization!r}")
    s_dd = s_zz = s_xx = 0.0
    for d, delta in _pair_blocks(x, z):
        s_dd += float(np.dot(d, delta))
        s_zz += float(np.dot(delta, delta))
        s_xx += float(np.dot(d, d))
    if s_zz == 0.0:
        return 1.0
    if s_xx == 0.0:
        # all ground-truth points identical: any chart matches at beta = 0
        return 0.0
    beta = s_dd / s_zz
    # second pass: accumulate the residual directly (no cancellation, so a
    # similarity transform lands at machine-precision stress)
    residual = 0.0
    for d, delta in _pair_blocks(x, z):
        err = d - beta * delta
        residual += float(np.dot(err, err))
    denom = s_xx if normalization == "truth" else beta * beta * s_zz
    if denom == 0.0:
        return 1.0
    return float(np.sqrt(residual / denom))


def evaluate(
    x,
    z,
    *,
    k: int | None = None,
    subsample: int | None = None,
    seed: int = 0,
) -> MetricsReport:
    """Full quality report: CT and TW at K = floor(0.05 * n) (clamped to at
    least 1) and KS, optionally on a seeded uniform subsample of the points."""
    x = _as_points(x)
    z = _as_points(z)
    if x.shape[0] != z.shape[0]:
        raise MetricsError("x and z must have the same number of points")
    n_total = x.shape[0]
    if subsample is not None:
        if subsample > n_total:
            raise MetricsError(f"subsample size {subsample} exceeds N={n_total}")
        if subsample < 2:
            raise MetricsError("subsample size must be >= 2")
        if subsample < n_total:
            idx = np.sort(np.random.default_rng(seed).choice(n_total, size=subsample, replace=False))
            x = x[idx]
            z = z[idx]
    n = x.shape[0]
    k_used = _check_k(k if k is not None else max(1, int(DEFAULT_NEIGHBOR_FRACTION * n)), n)
    rx = rank_matrix(x)
    rz = rank_matrix(z)
    tw = _rank_penalty_score(rx, rz, k_used)
    ct = _rank_penalty_score(rz, rx, k_used)
    ks = kruskal_stress(x, z)
    return MetricsReport(ct=ct, tw=tw, ks=ks, k_used=k_used, n_used=n, seed=seed)
