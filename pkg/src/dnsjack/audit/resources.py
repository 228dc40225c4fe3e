"""Parsing of recorded resource captures, two-point profiles, and resource clustering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import FormatError, IncompleteCaptureError, InputError, ParameterError, ParseError
from ..ml import ClusterModel, select_k, standardize

CPU_STAT, DEVICE_STAT, DISK_NET_STAT, PACKET_SUMMARY = "cpu_stat", "device_stat", "disk_net_stat", "packet_summary"
KINDS = (CPU_STAT, DEVICE_STAT, DISK_NET_STAT, PACKET_SUMMARY)

CPU_TOKENS = ("%user", "%nice", "%system", "%iowait", "%steal", "%idle")
DEVICE_TOKENS = ("Device", "tps", "kB_read/s", "kB_wrtn/s", "kB_read", "kB_wrtn")
DISK_NET_COLUMNS = ("disk_read", "disk_write", "net_recv", "net_send")
PACKET_COLUMNS = ("pkt_send", "pkt_rec", "pkt_oth")

CPU_MEASURES = ("cpu_user", "cpu_nice", "cpu_system", "cpu_iowait", "cpu_steal", "cpu_idle")
DEVICE_MEASURES = ("sda_tps", "sda_kB_read/s", "sda_kB_wrtn/s", "sda_kB_read", "sda_kB_wrtn")
PACKET_MEASURES = ("pkt_total",) + PACKET_COLUMNS
MEASURES = CPU_MEASURES + DEVICE_MEASURES + DISK_NET_COLUMNS + PACKET_MEASURES
OWNED = {CPU_STAT: CPU_MEASURES, DEVICE_STAT: DEVICE_MEASURES,
         DISK_NET_STAT: DISK_NET_COLUMNS, PACKET_SUMMARY: PACKET_MEASURES}

CPU_SUM_TOLERANCE = 0.5
SMALL_CLUSTER_FRACTION = 0.01
RESOURCE_K_RANGE = (2, 15)


def _number(cell: str, lineno: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {cell!r}", lineno)
    return value


def _lines(text: str):
    return [(i, line) for i, line in enumerate(text.splitlines(), 1) if line.strip()]


def _parse_cpu(text: str) -> dict[str, float]:
    lines = _lines(text)
    for pos, (_, line) in enumerate(lines):
        tokens = line.split()
        if all(t in tokens for t in CPU_TOKENS):
            cols = [tokens.index(t) for t in CPU_TOKENS]
            # a leading label such as "avg-cpu:" does not occupy a data column
            shift = min(cols)
            if pos + 1 >= len(lines):
                raise FormatError("cpu_stat capture has no data row")
            lineno, row = lines[pos + 1]
            cells = row.split()
            if len(cells) < max(cols) - shift + 1:
                raise ParseError(f"expected {len(CPU_TOKENS)} cpu columns", lineno)
            out = {m: _number(cells[c - shift], lineno) for m, c in zip(CPU_MEASURES, cols)}
            for m, v in out.items():
                if not 0 <= v <= 100:
                    raise ParseError(f"{m}={v} outside [0, 100]", lineno)
            total = sum(out.values())
            if abs(total - 100) > CPU_SUM_TOLERANCE:
                raise ParseError(f"cpu percentages sum to {total}, not 100", lineno)
            return out
    raise FormatError(f"cpu_stat header tokens {' '.join(CPU_TOKENS)} not found")


def _parse_device(text: str) -> dict[str, float]:
    lines = _lines(text)
    for pos, (_, line) in enumerate(lines):
        tokens = line.split()
        if tokens and tokens[0].rstrip(":") == "Device":
            if tuple([tokens[0].rstrip(":")] + tokens[1:]) != DEVICE_TOKENS:
                raise FormatError(f"device_stat header must be {' '.join(DEVICE_TOKENS)}")
            for lineno, row in lines[pos + 1:]:
                cells = row.split()
                if cells[0] == "sda":
                    if len(cells) != len(DEVICE_TOKENS):
                        raise ParseError(f"expected {len(DEVICE_TOKENS)} cells in sda row", lineno)
                    out = {m: _number(c, lineno) for m, c in zip(DEVICE_MEASURES, cells[1:])}
                    _non_negative(out, lineno)
                    return out
            raise FormatError("device_stat capture has no sda row")
    raise FormatError(f"device_stat header tokens {' '.join(DEVICE_TOKENS)} not found")


def _parse_csv(text: str, columns: Sequence[str], kind: str) -> dict[str, float]:
    lines = _lines(text)
    if not lines:
        raise FormatError(f"{kind} capture is empty")
    header = tuple(c.strip() for c in lines[0][1].split(","))
    if header != tuple(columns):
        raise FormatError(f"{kind} header must be {','.join(columns)}")
    if len(lines) != 2:
        raise FormatError(f"{kind} capture must hold exactly one data row")
    lineno, row = lines[1]
    cells = [c.strip() for c in row.split(",")]
    if len(cells) != len(columns):
        raise ParseError(f"expected {len(columns)} cells", lineno)
    out = {m: _number(c, lineno) for m, c in zip(columns, cells)}
    _non_negative(out, lineno)
    return out


def _non_negative(values: dict, lineno: int) -> None:
    for m, v in values.items():
        if v < 0:
            raise ParseError(f"negative counter {m}={v}", lineno)


def parse_resource_capture(capture: str, kind: str) -> dict[str, float]:
    """Measures owned by ``kind``, read from the verbatim tool output."""
    if kind == CPU_STAT:
        return _parse_cpu(capture)
    if kind == DEVICE_STAT:
        return _parse_device(capture)
    if kind == DISK_NET_STAT:
        return _parse_csv(capture, DISK_NET_COLUMNS, kind)
    if kind == PACKET_SUMMARY:
        out = _parse_csv(capture, PACKET_COLUMNS, kind)
        return {"pkt_total": out["pkt_send"] + out["pkt_rec"] + out["pkt_oth"], **out}
    raise ParameterError(f"unknown capture kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class ResourceProfile:
    url: str
    measures: dict[str, float] = field(default_factory=dict)

    def vector(self) -> np.ndarray:
        return np.array([self.measures[m] for m in MEASURES])

    def violations(self) -> list[str]:
        m = self.measures
        problems = []
        missing = set(MEASURES) - set(m)
        if missing:
            return [f"missing measures {sorted(missing)}"]
        for name in CPU_MEASURES:
            if not 0 <= m[name] <= 100:
                problems.append(f"{name} outside [0, 100]")
        if abs(sum(m[name] for name in CPU_MEASURES) - 100) > CPU_SUM_TOLERANCE:
            problems.append("cpu percentages do not sum to 100")
        parts = m["pkt_send"] + m["pkt_rec"] + m["pkt_oth"]
        if abs(m["pkt_total"] - parts) > 1e-9 * max(1.0, abs(parts)):
            problems.append("pkt_total differs from pkt_send + pkt_rec + pkt_oth")
        for name in MEASURES[len(CPU_MEASURES):]:
            if m[name] < 0:
                problems.append(f"{name} negative")
        return problems

    def to_dict(self) -> dict:
        return {"url": self.url, **{m: self.measures[m] for m in MEASURES}}


def _capture_set(captures: Mapping, label: str) -> dict[str, float]:
    missing = [k for k in KINDS if k not in captures]
    if missing:
        raise IncompleteCaptureError(f"{label} captures lack {', '.join(missing)}")
    out: dict[str, float] = {}
    for kind in KINDS:
        value = captures[kind]
        out.update(parse_resource_capture(value, kind) if isinstance(value, str) else value)
    return out


def build_resource_profile(t0: Mapping, t1: Mapping, url: str = "") -> ResourceProfile:
    """Per-measure mean of two capture sets (kind -> raw text or parsed measures)."""
    a, b = _capture_set(t0, "t0"), _capture_set(t1, "t1")
    profile = ResourceProfile(url, {m: (a[m] + b[m]) / 2 for m in MEASURES})
    problems = profile.violations()
    if problems:
        raise InputError(f"profile for {url or '<unnamed>'} invalid: {'; '.join(problems)}")
    return profile


@dataclass
class ResourceClustering:
    model: ClusterModel
    silhouette_table: dict[int, float]
    small_clusters: dict[int, list[str]]

    def to_dict(self, urls: Sequence[str]) -> dict:
        return {
            "k": self.model.k,
            "silhouette_table": {str(k): v for k, v in self.silhouette_table.items()},
            "cluster_sizes": self.model.sizes().tolist(),
            "small_clusters": {str(c): members for c, members in self.small_clusters.items()},
            "assignments": dict(zip(urls, self.model.labels.tolist())),
        }


def cluster_resource_profiles(profiles: Sequence[ResourceProfile], k_range=RESOURCE_K_RANGE,
                              seed: int = 0) -> ResourceClustering:
    """Standardize the 19 measures, choose K by silhouette, and list clusters under 1% of profiles."""
    lo, hi = k_range
    if len(profiles) < hi + 1:
        raise ParameterError(f"need at least {hi + 1} profiles for k up to {hi}")
    X = standardize(np.vstack([p.vector() for p in profiles]))
    model, table = select_k(X, k_range, seed)
    sizes = model.sizes()
    small = {int(c): sorted(profiles[i].url for i in np.flatnonzero(model.labels == c))
             for c in range(model.k) if 0 < sizes[c] < SMALL_CLUSTER_FRACTION * len(profiles)}
    return ResourceClustering(model, table, small)
