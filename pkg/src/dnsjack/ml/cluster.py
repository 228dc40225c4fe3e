"""K-Means (k-means++ seeding, Lloyd iterations) and silhouette-based K selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .. import kernels
from ..errors import DegenerateDataError, InvariantViolation, ParameterError

MAX_ITER = 300
_INERTIA_SLACK = 1e-9


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    seed: int
    labels: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)

    def predict(self, points) -> np.ndarray:
        labels, _ = kernels.assign_nearest(np.asarray(points, dtype=float), self.centroids)
        return labels

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def standardize(points) -> np.ndarray:
    """Zero mean, unit variance per column; constant columns become 0."""
    X = np.asarray(points, dtype=float)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def _n_distinct(X: np.ndarray) -> int:
    return len(np.unique(X, axis=0))


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterModel:
    """Lloyd's algorithm from k-means++ seeds; deterministic for a given seed.

    Stops when assignments no longer change or after ``max_iter`` rounds. An
    emptied cluster is re-seeded at the point farthest from its centroid.
    """
    X = np.ascontiguousarray(points, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("points must be a non-empty 2-D matrix")
    k = int(k)
    if k < 2:
        raise ParameterError("k must be at least 2")
    if k > len(X):
        raise ParameterError(f"k={k} exceeds the {len(X)} points")
    if _n_distinct(X) < k:
        raise ParameterError(f"fewer than k={k} distinct points")

    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    labels, d2 = kernels.assign_nearest(X, C)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        C[nonempty] = sums[nonempty] / counts[nonempty, None]
        for c in np.flatnonzero(~nonempty):
            far = int(np.argmax(d2))
            C[c] = X[far]
            d2[far] = 0.0
        new_labels, d2 = kernels.assign_nearest(X, C)
        inertia = float(d2.sum())
        if inertia > history[-1] * (1 + _INERTIA_SLACK) + _INERTIA_SLACK:
            raise InvariantViolation(f"k-means inertia rose from {history[-1]} to {inertia}")
        history.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusterModel(k, C, seed, labels, history[-1], n_iter, history)


def silhouette_samples(points, labels) -> np.ndarray:
    X = np.ascontiguousarray(points, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=k)
    if np.count_nonzero(sizes) < 2:
        raise ParameterError("silhouette needs at least two non-empty clusters")
    if np.all(X == X[0]):
        raise DegenerateDataError("all points identical: silhouette distances undefined")
    sums = kernels.cluster_distance_sums(X, labels, k)
    n = len(X)
    own = sizes[labels]
    a = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_to = sums / sizes[None, :]
    mean_to[:, sizes == 0] = np.inf
    mean_to[np.arange(n), labels] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    return np.where(own > 1, s, 0.0)


def silhouette(points, model: ClusterModel | Iterable[int]) -> float:
    """Mean silhouette; points in singleton clusters contribute 0."""
    labels = model.labels if isinstance(model, ClusterModel) else model
    return float(silhouette_samples(points, labels).mean())


def select_k(points, k_range: tuple[int, int], seed: int = 0) -> tuple[ClusterModel, dict[int, float]]:
    """Run kmeans for every k in the inclusive range; keep the best silhouette (ties: smaller k).

    Values of k the data cannot support (k >= number of distinct points) are skipped.
    """
    lo, hi = k_range
    if lo < 2 or hi < lo:
        raise ParameterError(f"bad k range {k_range}")
    X = np.ascontiguousarray(points, dtype=float)
    distinct = _n_distinct(X)
    if distinct < 2:
        raise DegenerateDataError("all points identical: silhouette distances undefined")
    table: dict[int, float] = {}
    best = None
    for k in range(lo, hi + 1):
        if k >= distinct:
            break
        model = kmeans(X, k, seed)
        table[k] = silhouette(X, model)
        if best is None or table[k] > table[best.k]:
            best = model
    if best is None:
        raise DegenerateDataError(f"only {distinct} distinct points; cannot cluster with k >= {lo}")
    return best, table
