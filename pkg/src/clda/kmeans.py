"""Euclidean KMeans over fused vectors.

Lloyd iterations with k-means++ initialization on an explicit PCG64
stream, so a (points, K, seed) triple always yields the same model.
Internally all work happens in id-sorted order, which makes the result
independent of the in-memory ordering of the input rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterModel:
    """Centroids, per-record assignments, and the within-cluster SSQ."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    # inertia value recorded at each assignment step, for convergence checks
    inertia_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.n_clusters)


def default_cluster_count(num_labels: int, num_records: int | None = None) -> int:
    """Default K: 64x|Y| for binary label spaces, else 16x|Y|.

    Binary tasks get the larger multiplier because 2x16 clusters is far too
    coarse for the datasets this targets. Capped at floor(n/2) when the
    dataset size is known, so clusters keep at least a couple of members.
    """
    if num_labels < 2:
        raise ValueError("num_labels must be at least 2")
    k = 64 * num_labels if num_labels == 2 else 16 * num_labels
    if num_records is not None:
        k = min(k, max(1, num_records // 2))
    return k


def assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per point by Euclidean distance, ties to lowest index."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if points.ndim != 2 or centroids.ndim != 2 or points.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: points {points.shape} vs centroids {centroids.shape}"
        )
    d2 = cdist(points, centroids, "sqeuclidean")
    return np.argmin(d2, axis=1)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: candidates weighted by squared distance to the chosen set."""
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = cdist(points, points[chosen[0]][None, :], "sqeuclidean")[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        else:
            # all remaining mass zero (duplicate-heavy data): any point works
            idx = int(rng.integers(n))
        chosen[j] = idx
        new_d2 = cdist(points, points[idx][None, :], "sqeuclidean")[:, 0]
        np.minimum(d2, new_d2, out=d2)
    return points[chosen].copy()


def _repair_empty(
    labels: np.ndarray, centroids: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Relocate each empty cluster to the worst-fit point.

    The point farthest from its current centroid becomes the new centroid
    (and sole member) of the empty cluster; the cleansing stage divides by
    cluster size, so empty clusters must never escape this function.
    Deterministic: empty clusters are processed in ascending index order
    and candidate ties resolve to the lowest point index.
    """
    counts = np.bincount(labels, minlength=centroids.shape[0])
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return labels, centroids
    labels = labels.copy()
    centroids = centroids.copy()
    d2 = cdist(points, centroids, "sqeuclidean")
    cur = d2[np.arange(points.shape[0]), labels].copy()
    for ci in empties:
        # never steal the only member of another cluster
        counts = np.bincount(labels, minlength=centroids.shape[0])
        eligible = counts[labels] > 1
        if not eligible.any():
            continue
        masked = np.where(eligible, cur, -np.inf)
        far = int(np.argmax(masked))
        centroids[ci] = points[far]
        labels[far] = ci
        cur[far] = 0.0
    return labels, centroids


def _cluster_means(
    points: np.ndarray, labels: np.ndarray, k: int, fallback: np.ndarray
) -> np.ndarray:
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    out = fallback.copy()
    nonzero = counts > 0
    out[nonzero] = sums[nonzero] / counts[nonzero, None]
    return out


def kmeans_fit(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    ids: np.ndarray | None = None,
) -> ClusterModel:
    """Lloyd KMeans with k-means++ init; stops when the max centroid shift < tol.

    `ids` fixes the iteration order used for initialization and tie-breaks;
    permuting (points, ids) together leaves the fitted model unchanged. By
    default row order is id order.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if not np.isfinite(points).all():
        raise ValueError("non-finite point passed to kmeans_fit")
    if not (1 <= k <= n):
        raise ValueError(f"K={k} must be in [1, n={n}]")
    if ids is None:
        order = np.arange(n)
    else:
        ids = np.asarray(ids)
        if ids.shape != (n,):
            raise ValueError("ids must have one entry per point")
        order = np.argsort(ids, kind="stable")
    pts = points[order]

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(pts, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    inertia_history: list[float] = []
    for _ in range(max_iter):
        d2 = cdist(pts, centroids, "sqeuclidean")
        labels = np.argmin(d2, axis=1)
        inertia_history.append(float(d2[np.arange(n), labels].sum()))
        labels, centroids = _repair_empty(labels, centroids, pts)
        new_centroids = _cluster_means(pts, labels, k, centroids)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    final = assign(pts, centroids)
    if np.bincount(final, minlength=k).min() > 0:
        labels = final
    inertia = float(
        cdist(pts, centroids, "sqeuclidean")[np.arange(n), labels].sum()
    )

    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = labels
    return ClusterModel(
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        inertia_history=inertia_history,
    )
