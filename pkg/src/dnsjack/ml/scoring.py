"""Per-window clustering and the malicious-probability ratio."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..errors import DegenerateDataError, ParameterError
from ..ingest import LabelMap
from .cluster import ClusterModel, select_k, standardize

log = logging.getLogger(__name__)

WINDOW_K_RANGE = (7, 24)
FLAG_THRESHOLD = 0.99


@dataclass(frozen=True)
class MaliciousScore:
    dn: str
    times_malicious: int
    times_seen: int

    def __post_init__(self):
        if not 0 <= self.times_malicious <= self.times_seen or self.times_seen < 1:
            raise ValueError(f"bad counts for {self.dn}: {self.times_malicious}/{self.times_seen}")

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.times_malicious, self.times_seen)

    @property
    def probability(self) -> float:
        return self.times_malicious / self.times_seen


@dataclass
class WindowClustering:
    window_index: int
    dns: list[str]
    model: ClusterModel | None
    silhouette_table: dict[int, float]


def cluster_window(window_index: int, dns: Sequence[str], matrix, k_range=WINDOW_K_RANGE,
                   seed: int = 0) -> WindowClustering:
    """Standardize one window's matrix and pick K by silhouette.

    Windows too small or too uniform for the lower end of the K range are kept
    with ``model=None``: their DNs still count as seen.
    """
    X = np.asarray(matrix, dtype=float)
    if len(X) != len(dns):
        raise ParameterError("one matrix row per DN required")
    if len(X) == 0:
        return WindowClustering(window_index, list(dns), None, {})
    Z = standardize(X)
    try:
        model, table = select_k(Z, k_range, seed)
    except DegenerateDataError as exc:
        log.info("window %d not clustered: %s", window_index, exc)
        return WindowClustering(window_index, list(dns), None, {})
    return WindowClustering(window_index, list(dns), model, table)


def malicious_clusters(dns: Sequence[str], assignments, labels: LabelMap) -> set[int]:
    """Clusters whose known-malicious fraction strictly exceeds the window base rate."""
    bad = np.array([labels.is_known_malicious(dn) for dn in dns], dtype=bool)
    assignments = np.asarray(assignments)
    n, m = len(dns), int(bad.sum())
    if m == 0:
        return set()
    sizes = Counter(assignments.tolist())
    hits = Counter(assignments[bad].tolist())
    # m_c / n_c > m / n, in integers
    return {c for c, n_c in sizes.items() if hits.get(c, 0) * n > m * n_c}


def score_malicious_probability(window_models: Iterable[tuple[Sequence[str], ClusterModel | None]],
                                labels: LabelMap) -> list[MaliciousScore]:
    """Ratio of malicious-cluster memberships to appearances, per DN.

    ``window_models`` holds (DNs in row order, fitted model or None) per window.
    Sorted by descending probability, then DN.
    """
    seen: Counter[str] = Counter()
    flagged: Counter[str] = Counter()
    for dns, model in window_models:
        seen.update(set(dns))
        if model is None:
            continue
        if len(model.labels) != len(dns):
            raise ParameterError("model assignments do not match the window's DNs")
        bad = malicious_clusters(dns, model.labels, labels)
        if not bad:
            continue
        flagged.update({dn for dn, c in zip(dns, model.labels.tolist()) if c in bad})
    scores = [MaliciousScore(dn, flagged[dn], n) for dn, n in seen.items()]
    scores.sort(key=lambda s: (-s.ratio, s.dn))
    return scores


def flag_suspicious(scores: Iterable[MaliciousScore], threshold: float = FLAG_THRESHOLD) -> list[MaliciousScore]:
    cut = Fraction(str(threshold))
    return [s for s in scores if s.ratio > cut]


def write_scores_csv(scores: Iterable[MaliciousScore], stream) -> None:
    stream.write("dn,times_malicious,times_seen,probability\n")
    for s in scores:
        stream.write(f"{s.dn},{s.times_malicious},{s.times_seen},{s.probability!r}\n")
