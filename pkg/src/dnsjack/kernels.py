"""Hot-loop kernels, backed by the compiled ``_core`` extension when it is importable.

Set ``DNSJACK_PURE_PYTHON=1`` to force the numpy/pure-Python fallback. ``BACKEND``
names the implementation in use.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("DNSJACK_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

GINI, ENTROPY = 0, 1


def assign_nearest(X, C, impl=None):
    impl = impl or _impl
    return impl.assign_nearest(np.ascontiguousarray(X, dtype=np.float64),
                               np.ascontiguousarray(C, dtype=np.float64))


def cluster_distance_sums(X, labels, k, impl=None):
    impl = impl or _impl
    return impl.cluster_distance_sums(np.ascontiguousarray(X, dtype=np.float64),
                                      np.ascontiguousarray(labels, dtype=np.int64), int(k))


def eccentricities(indptr, indices, sources, impl=None):
    impl = impl or _impl
    return impl.eccentricities(np.ascontiguousarray(indptr, dtype=np.int64),
                               np.ascontiguousarray(indices, dtype=np.int64),
                               np.ascontiguousarray(sources, dtype=np.int64))


def split_scan(values, y, n_classes, min_leaf, criterion, impl=None):
    impl = impl or _impl
    return impl.split_scan(np.ascontiguousarray(values, dtype=np.float64),
                           np.ascontiguousarray(y, dtype=np.int64),
                           int(n_classes), int(min_leaf), int(criterion))


def implementations():
    """Mapping of backend name to module, for cross-checking and benchmarks."""
    impls = {"python": _fallback}
    try:
        from . import _core
        impls["compiled"] = _core
    except ImportError:
        pass
    return impls
