"""K-means++ seeding and Lloyd refinement over embedding vectors.

Kept free of any topic/session knowledge so the math can be property-tested
in isolation. All randomness flows through an injected numpy Generator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class KTooLarge(ValueError):
    def __init__(self, k: int, n: int):
        super().__init__(f"k={k} exceeds number of points n={n}")


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    centroids: np.ndarray  # (k, d)
    assignments: np.ndarray  # (n,) cluster index per point
    inertia: float


def _pairwise_sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Choose k initial centroids: first uniform, each next one sampled with
    probability proportional to squared distance from the nearest chosen
    centroid. Falls back to uniform sampling (without replacement) when all
    remaining distances are zero, e.g. duplicate point sets.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if k < 1 or k > n:
        raise KTooLarge(k, n)
    chosen = [int(rng.integers(n))]
    min_d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = float(min_d2.sum())
        if total <= 0.0:
            remaining = np.setdiff1d(np.arange(n), np.array(chosen))
            idx = int(rng.choice(remaining))
        else:
            idx = int(rng.choice(n, p=min_d2 / total))
        chosen.append(idx)
        min_d2 = np.minimum(min_d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def lloyd_cluster(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iters: int = 100,
    tol: float = 1e-9,
) -> ClusteringResult:
    """Alternate nearest-centroid assignment and mean updates until centroids
    move less than ``tol`` or ``max_iters`` passes. Empty clusters are
    re-seeded to the point currently farthest from its own centroid, so every
    cluster stays populated. Inertia is non-increasing across iterations.
    """
    points = np.asarray(points, dtype=float)
    centroids = np.asarray(centroids, dtype=float).copy()
    if points.ndim != 2 or centroids.ndim != 2 or points.shape[1] != centroids.shape[1]:
        raise DimensionMismatch(
            f"points {points.shape} vs centroids {centroids.shape}"
        )
    k = len(centroids)
    d2 = _pairwise_sq_dists(points, centroids)
    assignments = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(points)), assignments].sum())
    for _ in range(max_iters):
        new_centroids = centroids.copy()
        for c in range(k):
            mask = assignments == c
            if mask.any():
                new_centroids[c] = points[mask].mean(axis=0)
            else:
                worst = int(
                    np.argmax(d2[np.arange(len(points)), assignments])
                )
                new_centroids[c] = points[worst]
                assignments[worst] = c
                d2 = _pairwise_sq_dists(points, new_centroids)
        movement = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        d2 = _pairwise_sq_dists(points, centroids)
        assignments = np.argmin(d2, axis=1)
        new_inertia = float(d2[np.arange(len(points)), assignments].sum())
        if new_inertia > inertia + 1e-9:
            raise AssertionError(
                f"inertia increased {inertia} -> {new_inertia}"
            )
        inertia = new_inertia
        if movement < tol:
            break
    return ClusteringResult(
        k=k, centroids=centroids, assignments=assignments, inertia=inertia
    )
