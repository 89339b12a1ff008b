"""Lloyd's k-means over embedding rows, and an elbow scan of inertia against k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

ELBOW_GRID = (5, 20, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500)

# cluster counts picked by the elbow method on the full benchmarks
CLUSTER_PRESETS = {
    ("wn18rr", "distmult"): 300,
    ("wn18rr", "complex"): 100,
    ("wn18rr", "transe"): 50,
    ("fb15k-237", "distmult"): 200,
    ("fb15k-237", "complex"): 300,
    ("fb15k-237", "transe"): 100,
}


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    history: list[float] = field(default_factory=list)


def _sq_distances(points: np.ndarray, centroids: np.ndarray, chunk_elems: int = 4_000_000) -> np.ndarray:
    n, d = points.shape
    k = centroids.shape[0]
    out = np.empty((n, k))
    step = max(1, chunk_elems // max(1, k * d))
    for a in range(0, n, step):
        diff = points[a:a + step, None, :] - centroids[None, :, :]
        out[a:a + step] = np.einsum("ikd,ikd->ik", diff, diff)
    return out


def inertia_of(points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    diff = points - centroids[assignments]
    return float(np.sum(diff * diff))


def kmeans(points, k: int, seed: int = 0, max_iters: int = 100) -> KMeansResult:
    """Lloyd iterations from k distinct random points.

    Stops once no assignment changes or after ``max_iters`` rounds.  A cluster
    left empty takes over the point farthest from its current centroid.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = X[np.sort(rng.choice(n, size=k, replace=False))].copy()
    assign = np.full(n, -1)
    history: list[float] = []
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sq_distances(X, centroids)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own = d2[np.arange(n), new]
            own[counts[new] <= 1] = -np.inf  # never strip a singleton
            far = int(np.argmax(own))
            counts[new[far]] -= 1
            new[far] = empty
            counts[empty] = 1
            d2[far] = np.inf
            d2[far, empty] = 0.0
        changed = not np.array_equal(new, assign)
        assign = new
        for c in range(k):
            centroids[c] = X[assign == c].mean(axis=0)
        history.append(inertia_of(X, assign, centroids))
        if not changed:
            break
    return KMeansResult(assign, centroids, history[-1], it, history)


def elbow_scan(points, grid=ELBOW_GRID, seed: int = 0, n_init: int = 1, max_iters: int = 100) -> list[tuple[int, float]]:
    """Best-of-``n_init`` inertia for each k in ``grid``; k larger than the point count is skipped."""
    X = np.asarray(points, dtype=float)
    rows = []
    for k in grid:
        if k > len(X):
            log.warning("skipping k=%d: only %d points", k, len(X))
            continue
        best = min(kmeans(X, k, seed + i, max_iters).inertia for i in range(n_init))
        rows.append((int(k), best))
    return rows
