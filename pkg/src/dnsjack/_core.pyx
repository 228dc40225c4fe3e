# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror :mod:`dnsjack._fallback` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log2, INFINITY

cnp.import_array()


def assign_nearest(const double[:, ::1] X, const double[:, ::1] C):
    """Index of the nearest centroid for each row, and the squared distance to it."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = C.shape[0]
    cdef Py_ssize_t i, j, t
    cdef double best, acc, diff
    cdef Py_ssize_t arg
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = labels
    cdef double[::1] dd = dist2
    with nogil:
        for i in range(n):
            best = INFINITY
            arg = 0
            for j in range(k):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - C[j, t]
                    acc = acc + diff * diff
                if acc < best:
                    best = acc
                    arg = j
            lab[i] = arg
            dd[i] = best
    return labels, dist2


def cluster_distance_sums(const double[:, ::1] X, const cnp.int64_t[::1] labels, Py_ssize_t k):
    """sums[i, c] = sum of Euclidean distances from row i to every row of cluster c."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double acc, diff, dist
    sums = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] S = sums
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - X[j, t]
                    acc = acc + diff * diff
                dist = sqrt(acc)
                S[i, labels[j]] += dist
                S[j, labels[i]] += dist
    return sums


def eccentricities(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                   const cnp.int64_t[::1] sources):
    """Unweighted BFS eccentricity of each source node in a CSR graph."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t m = sources.shape[0]
    cdef Py_ssize_t s, head, tail, u, v, e, src
    cdef cnp.int64_t far
    out = np.zeros(m, dtype=np.int64)
    dist_arr = np.full(n, -1, dtype=np.int64)
    queue_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    cdef cnp.int64_t[::1] dist = dist_arr
    cdef cnp.int64_t[::1] queue = queue_arr
    with nogil:
        for s in range(m):
            src = sources[s]
            dist[src] = 0
            queue[0] = src
            head = 0
            tail = 1
            far = 0
            while head < tail:
                u = queue[head]
                head += 1
                for e in range(indptr[u], indptr[u + 1]):
                    v = indices[e]
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        if dist[v] > far:
                            far = dist[v]
                        queue[tail] = v
                        tail += 1
            res[s] = far
            for u in range(tail):
                dist[queue[u]] = -1
    return out


cdef inline double _impurity(const double* counts, Py_ssize_t c, double n, int criterion) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0, p
    if n <= 0:
        return 0.0
    if criterion == 0:
        for j in range(c):
            p = counts[j] / n
            acc = acc + p * p
        return 1.0 - acc
    for j in range(c):
        if counts[j] > 0:
            p = counts[j] / n
            acc = acc - p * log2(p)
    return acc


def split_scan(const double[::1] values, const cnp.int64_t[::1] y, Py_ssize_t n_classes,
               Py_ssize_t min_leaf, int criterion):
    """Weighted child impurity for every admissible cut of a sorted column.

    Returns an array ``imp`` of length ``n`` where ``imp[i]`` is the impurity of
    the cut placing rows ``[0, i)`` left; inadmissible cuts hold ``inf``.
    """
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i, j
    out = np.full(n, np.inf, dtype=np.float64)
    cdef double[::1] imp = out
    left_arr = np.zeros(n_classes, dtype=np.float64)
    right_arr = np.zeros(n_classes, dtype=np.float64)
    cdef double[::1] left = left_arr
    cdef double[::1] right = right_arr
    cdef double nl, nr, total = <double>n
    for i in range(n):
        right[y[i]] += 1.0
    with nogil:
        for i in range(1, n):
            left[y[i - 1]] += 1.0
            right[y[i - 1]] -= 1.0
            if values[i] <= values[i - 1]:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            nl = <double>i
            nr = total - nl
            imp[i] = (nl * _impurity(&left[0], n_classes, nl, criterion)
                      + nr * _impurity(&right[0], n_classes, nr, criterion)) / total
    return out
