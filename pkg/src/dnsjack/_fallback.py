"""Pure-Python / numpy implementations of the compiled kernels in ``_core.pyx``."""
from collections import deque

import numpy as np
from scipy.spatial.distance import cdist

_CHUNK = 1024


def assign_nearest(X, C):
    d2 = cdist(X, C, "sqeuclidean")
    labels = np.argmin(d2, axis=1).astype(np.int64)
    return labels, d2[np.arange(len(X)), labels]


def cluster_distance_sums(X, labels, k):
    n = len(X)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sums = np.empty((n, k))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        sums[lo:hi] = cdist(X[lo:hi], X) @ onehot
    return sums


def eccentricities(indptr, indices, sources):
    n = len(indptr) - 1
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    out = np.zeros(len(sources), dtype=np.int64)
    dist = [-1] * n
    for s, src in enumerate(sources):
        src = int(src)
        dist[src] = 0
        seen = [src]
        queue = deque([src])
        far = 0
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in indices[indptr[u]:indptr[u + 1]]:
                if dist[v] < 0:
                    dist[v] = du
                    far = du
                    seen.append(v)
                    queue.append(v)
        out[s] = far
        for u in seen:
            dist[u] = -1
    return out


def _node_impurity(counts, n, criterion):
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / n[:, None]
        if criterion == 0:
            imp = 1.0 - np.sum(p * p, axis=1)
        else:
            logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
            imp = -np.sum(p * logs, axis=1)
    return np.where(n > 0, imp, 0.0)


def split_scan(values, y, n_classes, min_leaf, criterion):
    n = len(values)
    out = np.full(n, np.inf)
    if n < 2:
        return out
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]  # row i-1 -> counts of rows [0, i)
    right = left[-1] + onehot[-1] - left
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    imp = (nl * _node_impurity(left, nl, criterion) + nr * _node_impurity(right, nr, criterion)) / n
    ok = (values[1:] > values[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    out[1:][ok] = imp[ok]
    return out
