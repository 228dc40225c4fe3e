"""Greedy CART decision tree with deterministic tie-breaking."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import kernels
from ..errors import ParameterError

TIE_TOL = 1e-12
CRITERIA = {"gini": kernels.GINI, "entropy": kernels.ENTROPY}


@dataclass(frozen=True)
class TreeHyperparameters:
    criterion: str = "gini"
    max_depth: int | None = 10
    min_samples_leaf: int = 13
    min_samples_split: int = 12
    splitter: str = "best"

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ParameterError(f"criterion must be one of {sorted(CRITERIA)}")
        if self.splitter != "best":
            raise ParameterError("only splitter='best' is supported")
        if self.max_depth is not None and (not isinstance(self.max_depth, int) or self.max_depth < 1):
            raise ParameterError("max_depth must be a positive integer or None")
        if not isinstance(self.min_samples_leaf, int) or self.min_samples_leaf < 1:
            raise ParameterError("min_samples_leaf must be a positive integer")
        if not isinstance(self.min_samples_split, int) or self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be an integer >= 2")

    @classmethod
    def preset(cls, name: str) -> "TreeHyperparameters":
        try:
            return PRESETS[name]
        except KeyError:
            raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


PRESETS = {
    "paper": TreeHyperparameters("gini", 10, 13, 12),
    "tpot_a": TreeHyperparameters("gini", 10, 13, 13),
    "tpot_b": TreeHyperparameters("entropy", 7, 18, 20),
}


@dataclass
class TreeNode:
    counts: list[int]
    depth: int
    impurity: float
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def n_samples(self) -> int:
        return sum(self.counts)


@dataclass
class TreeModel:
    hyperparameters: TreeHyperparameters
    classes: list
    n_features: int
    nodes: list[TreeNode] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes)

    @property
    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]

    def apply(self, X) -> np.ndarray:
        """Leaf node index for every row."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ParameterError(f"expected a matrix with {self.n_features} columns")
        out = np.empty(len(X), dtype=np.int64)
        stack = [(0, np.arange(len(X)))]
        while stack:
            i, rows = stack.pop()
            node = self.nodes[i]
            if node.is_leaf:
                out[rows] = i
                continue
            go_left = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def predict_proba(self, X) -> np.ndarray:
        dist = np.array([n.counts for n in self.nodes], dtype=float)
        dist /= dist.sum(axis=1, keepdims=True)
        return dist[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        counts = np.array([n.counts for n in self.nodes])
        # argmax picks the first maximal class on ties
        return np.asarray(self.classes)[counts.argmax(axis=1)[self.apply(X)]]

    def to_dict(self) -> dict:
        return {
            "hyperparameters": asdict(self.hyperparameters),
            "classes": [_jsonable(c) for c in self.classes],
            "n_features": self.n_features,
            "nodes": [asdict(n) for n in self.nodes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeModel":
        return cls(TreeHyperparameters(**doc["hyperparameters"]), list(doc["classes"]),
                   int(doc["n_features"]), [TreeNode(**n) for n in doc["nodes"]])


def _jsonable(v):
    return v.item() if isinstance(v, np.generic) else v


def node_impurity(counts, criterion: str) -> float:
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n == 0:
        return 0.0
    p = c / n
    if criterion == "gini":
        return float(1.0 - (p * p).sum())
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int, criterion: str):
    """(feature, threshold, weighted child impurity) of the best admissible cut, or None.

    Ties within TIE_TOL of the minimum go to the lowest feature, then the lowest threshold.
    """
    code = CRITERIA[criterion]
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        imp = kernels.split_scan(vals, y[order], n_classes, min_leaf, code)
        m = imp.min()
        if not np.isfinite(m):
            continue
        pos = int(np.flatnonzero(imp <= m + TIE_TOL)[0])
        if best is None or m < best[2] - TIE_TOL:
            lo, hi = vals[pos - 1], vals[pos]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (f, float(thr), float(m))
    return best


def train_decision_tree(X, y, hyperparameters: TreeHyperparameters | None = None) -> TreeModel:
    """Fit a CART tree; splits must strictly reduce impurity."""
    hp = hyperparameters or PRESETS["paper"]
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise ParameterError("X must be a non-empty matrix with one label per row")
    if not np.isfinite(X).all():
        raise ParameterError("X contains non-finite values")
    classes, yi = np.unique(y, return_inverse=True)
    yi = yi.astype(np.int64)
    k = len(classes)
    model = TreeModel(hp, classes.tolist(), X.shape[1])

    def make(rows: np.ndarray, depth: int) -> int:
        counts = np.bincount(yi[rows], minlength=k)
        imp = node_impurity(counts, hp.criterion)
        model.nodes.append(TreeNode(counts.tolist(), depth, imp))
        return len(model.nodes) - 1

    root = make(np.arange(len(X)), 0)
    stack = [(root, np.arange(len(X)))]
    while stack:
        i, rows = stack.pop()
        node = model.nodes[i]
        n = len(rows)
        if (hp.max_depth is not None and node.depth >= hp.max_depth) or n < hp.min_samples_split \
                or n < 2 * hp.min_samples_leaf or node.impurity <= TIE_TOL:
            continue
        split = best_split(X[rows], yi[rows], k, hp.min_samples_leaf, hp.criterion)
        if split is None or split[2] >= node.impurity - TIE_TOL:
            continue
        f, thr, _ = split
        go_left = X[rows, f] <= thr
        node.feature, node.threshold = f, thr
        node.left = make(rows[go_left], node.depth + 1)
        node.right = make(rows[~go_left], node.depth + 1)
        stack.append((node.right, rows[~go_left]))
        stack.append((node.left, rows[go_left]))
    return model
