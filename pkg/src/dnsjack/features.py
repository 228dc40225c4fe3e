"""Temporal, string, and query/response features per DN, assembled into 48-value rows."""
from __future__ import annotations

import csv
import ipaddress
import math
import zlib
from collections import Counter, defaultdict
from dataclasses import astuple, dataclass, fields
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .dngraph import DnGraphSnapshot, NodeNotFound, build_snapshot, snapshot_metrics
from .domains import public_suffix, registered_domain, subdomain_depth
from .errors import AssemblyError, FormatError
from .ingest import DnsQueryRecord, Segmentation

CATALOG_VERSION = "dnsjack-48/1"
DEFAULT_BURST_FRACTION = 0.8
VOWELS = frozenset("aeiou")


@dataclass(frozen=True)
class TemporalFeatureSet:
    n_qfreq: int = 0
    max_qfreq: int = 0
    n_bursts: int = 0
    max_burst: int = 0
    n_ch_deg: int = 0
    max_deg: int = 0
    n_ch_dia: int = 0
    max_ch_dia: int = 0


@dataclass(frozen=True)
class StringFeatureSet:
    length: int
    label_count: int
    entropy: float
    digit_ratio: float
    hyphen_count: int
    vowel_ratio: float
    tld: str
    subdomain_depth: int

    @property
    def tld_code(self) -> float:
        """Stable numeric stand-in for the categorical TLD, in [0, 1)."""
        return zlib.crc32(self.tld.encode()) / 2**32

    def numeric(self) -> tuple:
        return (self.length, self.label_count, self.entropy, self.digit_ratio,
                self.hyphen_count, self.vowel_ratio, self.tld_code, self.subdomain_depth)


QR_QUANTITIES = ("ips", "ipv4", "ipv6", "ns", "ns_domains", "ip_prefixes", "qtypes", "answers")
QR_STATS = ("total", "win_mean", "win_max", "win_var")

_QR_DOC = {
    "ips": "distinct resolved IP addresses",
    "ipv4": "distinct resolved IPv4 addresses",
    "ipv6": "distinct resolved IPv6 addresses",
    "ns": "distinct name-server hosts",
    "ns_domains": "distinct registered domains among name-server hosts",
    "ip_prefixes": "distinct /24 (IPv4) or /48 (IPv6) prefixes of resolved IPs",
    "qtypes": "distinct query types",
    "answers": "resolved-IP answers summed over responses (not distinct)",
}
_STAT_DOC = {
    "total": "over the whole span",
    "win_mean": "per-window mean (absent windows count as 0)",
    "win_max": "per-window maximum",
    "win_var": "per-window population variance",
}

CATALOG: tuple[tuple[str, str], ...] = (
    ("n_qfreq", "total queries for the DN over the span"),
    ("max_qfreq", "maximum queries in one window"),
    ("n_bursts", "windows whose query count is >= burst fraction x maximum (and > 0)"),
    ("max_burst", "largest burst size (= maximum per-window query count)"),
    ("n_ch_deg", "consecutive-window changes of DN graph degree"),
    ("max_deg", "maximum DN graph degree over windows"),
    ("n_ch_dia", "consecutive-window changes of component diameter"),
    ("max_ch_dia", "maximum component diameter over windows"),
    ("length", "characters in the DN"),
    ("label_count", "dot-separated labels"),
    ("entropy", "Shannon entropy of the DN characters, dots included (bits)"),
    ("digit_ratio", "digits / length"),
    ("hyphen_count", "hyphens"),
    ("vowel_ratio", "vowels (aeiou) / letters; 0 when the DN has no letters"),
    ("tld_code", "crc32 of the public suffix / 2^32"),
    ("subdomain_depth", "labels left of the registered domain"),
) + tuple((f"{q}_{s}", f"{_QR_DOC[q]}, {_STAT_DOC[s]}") for q in QR_QUANTITIES for s in QR_STATS)

FEATURE_NAMES = tuple(name for name, _ in CATALOG)
N_FEATURES = len(CATALOG)
assert N_FEATURES == 48

# Features that stay meaningful when computed inside a single window.
WINDOW_FEATURES = tuple(i for i, name in enumerate(FEATURE_NAMES)
                        if not name.startswith(("n_ch_", "n_bursts")) and not name.endswith("_win_var"))


@dataclass(frozen=True)
class QueryResponseFeatureSet:
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(QR_QUANTITIES) * len(QR_STATS):
            raise ValueError("query/response set needs 32 values")

    @classmethod
    def zeros(cls):
        return cls((0.0,) * 32)


@dataclass(frozen=True)
class FeatureVector:
    dn: str
    granularity: str
    values: tuple[float, ...]
    catalog_version: str = CATALOG_VERSION

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))


def query_frequency_series(windows: Segmentation, dn: str) -> list[int]:
    return [sum(1 for r in records if r.domain == dn) for _, records in windows]


def burst_features(series: Sequence[float], threshold_frac: float = DEFAULT_BURST_FRACTION) -> tuple[int, int]:
    """(number of burst windows, largest window count).

    A window is a burst when its count is positive and at least ``threshold_frac``
    of the series maximum. The comparison is done in exact rational arithmetic so
    that e.g. 8 >= 0.8 * 10 holds.
    """
    if not 0 < threshold_frac <= 1:
        raise ValueError("threshold_frac must lie in (0, 1]")
    if len(series) == 0:
        raise ValueError("empty series")
    peak = max(series)
    if peak <= 0:
        return 0, 0
    frac = Fraction(str(threshold_frac))
    limit = frac * Fraction(peak)
    n = sum(1 for c in series if c > 0 and Fraction(c) >= limit)
    return n, peak


def _changes(series: Sequence[int]) -> int:
    return sum(1 for a, b in zip(series, series[1:]) if a != b)


def graph_dynamics_features(snapshots: Sequence[DnGraphSnapshot], dn: str) -> tuple[int, int, int, int]:
    """(#degree changes, max degree, #diameter changes, max diameter) over window order."""
    degrees, diameters = [], []
    for snap in snapshots:
        try:
            deg, dia = snapshot_metrics(snap, dn)
        except NodeNotFound:
            deg, dia = 0, 0
        degrees.append(deg)
        diameters.append(dia)
    if not degrees:
        return 0, 0, 0, 0
    return _changes(degrees), max(degrees), _changes(diameters), max(diameters)


def shannon_entropy(text: str) -> float:
    n = len(text)
    return -sum((c / n) * math.log2(c / n) for c in Counter(text).values()) if n else 0.0


def string_features(dn: str) -> StringFeatureSet:
    n = len(dn)
    letters = sum(ch.isalpha() for ch in dn)
    vowels = sum(ch in VOWELS for ch in dn)
    return StringFeatureSet(
        length=n,
        label_count=dn.count(".") + 1,
        entropy=shannon_entropy(dn),
        digit_ratio=sum(ch.isdigit() for ch in dn) / n,
        hyphen_count=dn.count("-"),
        vowel_ratio=vowels / letters if letters else 0.0,
        tld=public_suffix(dn),
        subdomain_depth=subdomain_depth(dn),
    )


@lru_cache(maxsize=1 << 16)
def _ip_facts(ip: str) -> tuple[int, str]:
    addr = ipaddress.ip_address(ip)
    bits = 24 if addr.version == 4 else 48
    return addr.version, str(ipaddress.ip_network(f"{ip}/{bits}", strict=False))


def _window_sets(records: Iterable[DnsQueryRecord]) -> dict[str, set | int]:
    sets = {q: set() for q in QR_QUANTITIES if q != "answers"}
    answers = 0
    for r in records:
        answers += len(r.resolved_ips)
        sets["qtypes"].add(r.query_type)
        for ip in r.resolved_ips:
            version, prefix = _ip_facts(ip)
            sets["ips"].add(ip)
            sets["ipv4" if version == 4 else "ipv6"].add(ip)
            sets["ip_prefixes"].add(prefix)
        for ns in r.name_servers:
            sets["ns"].add(ns)
            sets["ns_domains"].add(registered_domain(ns))
    sets["answers"] = answers
    return sets


def query_response_features(window_records: Sequence[Sequence[DnsQueryRecord]]) -> QueryResponseFeatureSet:
    """Aggregate one DN's records, given as one (possibly empty) list per window."""
    per_window = [_window_sets(recs) for recs in window_records]
    values: list[float] = []
    for q in QR_QUANTITIES:
        if q == "answers":
            series = np.array([w["answers"] for w in per_window], dtype=float)
            total = float(series.sum())
        else:
            series = np.array([len(w[q]) for w in per_window], dtype=float)
            total = float(len(set().union(*(w[q] for w in per_window))))
        if len(series) == 0:
            series = np.zeros(1)
        values += [total, float(series.mean()), float(series.max()), float(series.var())]
    return QueryResponseFeatureSet(tuple(values))


def assemble_feature_vector(dn: str, temporal: TemporalFeatureSet, strings: StringFeatureSet,
                            query_response: QueryResponseFeatureSet, granularity: str = "ALL") -> FeatureVector:
    values = tuple(float(v) for v in astuple(temporal) + strings.numeric() + query_response.values)
    for name, v in zip(FEATURE_NAMES, values):
        if not math.isfinite(v):
            raise AssemblyError(f"feature {name} of {dn} is not finite ({v})")
    return FeatureVector(dn, str(granularity), values)


def extract_features(windows: Segmentation, dns: Iterable[str] | None = None,
                     snapshots: Sequence[DnGraphSnapshot] | None = None,
                     threshold_frac: float = DEFAULT_BURST_FRACTION) -> list[FeatureVector]:
    """Feature rows for every DN in ``dns`` (default: every DN seen), sorted by DN."""
    if not windows:
        return []
    granularity = windows[0][0].granularity.label
    if snapshots is None:
        snapshots = [build_snapshot(recs, w.index) for w, recs in windows]
    by_window: list[dict[str, list[DnsQueryRecord]]] = []
    for _, recs in windows:
        grouped = defaultdict(list)
        for r in recs:
            grouped[r.domain].append(r)
        by_window.append(grouped)
    if dns is None:
        dns = {dn for grouped in by_window for dn in grouped}

    rows = []
    for dn in sorted(dns):
        per_window = [grouped.get(dn, []) for grouped in by_window]
        series = [len(recs) for recs in per_window]
        n_bursts, max_burst = burst_features(series, threshold_frac)
        n_ch_deg, max_deg, n_ch_dia, max_dia = graph_dynamics_features(snapshots, dn)
        temporal = TemporalFeatureSet(sum(series), max(series), n_bursts, max_burst,
                                      n_ch_deg, max_deg, n_ch_dia, max_dia)
        rows.append(assemble_feature_vector(dn, temporal, string_features(dn),
                                            query_response_features(per_window), granularity))
    return rows


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([v.values for v in vectors], dtype=float).reshape(len(vectors), N_FEATURES)


def write_feature_matrix(vectors: Sequence[FeatureVector], stream, labels: dict[str, str] | None = None) -> None:
    """csv ``dn,granularity,f1..f48[,label]``; floats use repr so re-reading is lossless."""
    writer = csv.writer(stream, lineterminator="\n")
    header = ["dn", "granularity"] + [f"f{i}" for i in range(1, N_FEATURES + 1)]
    if labels is not None:
        header.append("label")
    writer.writerow(header)
    for v in vectors:
        row = [v.dn, v.granularity] + [repr(x) for x in v.values]
        if labels is not None:
            row.append(labels[v.dn])
        writer.writerow(row)


def read_feature_matrix(stream) -> tuple[list[FeatureVector], dict[str, str] | None]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty feature matrix") from None
    expected = ["dn", "granularity"] + [f"f{i}" for i in range(1, N_FEATURES + 1)]
    has_label = header == expected + ["label"]
    if header != expected and not has_label:
        raise FormatError("feature matrix header does not match dn,granularity,f1..f48[,label]")
    vectors, labels = [], {} if has_label else None
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} cells")
        vectors.append(FeatureVector(row[0], row[1], tuple(float(x) for x in row[2:2 + N_FEATURES])))
        if has_label:
            labels[row[0]] = row[-1]
    return vectors, labels


def catalog_document() -> str:
    lines = [f"# Feature catalog {CATALOG_VERSION}", "", "| column | name | definition |", "|---|---|---|"]
    lines += [f"| f{i} | {name} | {doc} |" for i, (name, doc) in enumerate(CATALOG, start=1)]
    lines += ["", "Window clustering uses columns: "
              + ", ".join(f"f{i + 1}" for i in WINDOW_FEATURES), ""]
    return "\n".join(lines)


def temporal_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(TemporalFeatureSet))
