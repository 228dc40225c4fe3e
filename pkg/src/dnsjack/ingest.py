"""DNS query-log parsing, label lists, and temporal segmentation."""
from __future__ import annotations

import csv
import enum
import io
import ipaddress
import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .domains import normalize_domain, registered_domain
from .errors import FormatError, InputError

log = logging.getLogger(__name__)

CSV_COLUMNS = ("timestamp", "domain", "query_type", "resolved_ips", "name_servers")
MULTI_SEP = ";"
MAX_MALFORMED_FRACTION = 0.5

_DOMAIN_RE = re.compile(r"^[a-z0-9_*-]+(\.[a-z0-9_*-]+)*$")


class QueryType(str, enum.Enum):
    A = "A"
    AAAA = "AAAA"
    NS = "NS"
    MX = "MX"
    TXT = "TXT"
    CNAME = "CNAME"
    OTHER = "other"

    @classmethod
    def parse(cls, text: str) -> "QueryType":
        text = text.strip()
        if not text:
            raise ValueError("empty query type")
        try:
            return cls(text.upper())
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True, slots=True)
class DnsQueryRecord:
    timestamp: int
    domain: str
    query_type: QueryType = QueryType.A
    resolved_ips: tuple[str, ...] = ()
    name_servers: tuple[str, ...] = ()

    @classmethod
    def build(cls, timestamp, domain, query_type="A", resolved_ips=(), name_servers=()):
        """Validate and normalize raw field values; raises ValueError on bad input."""
        ts = int(timestamp)
        if isinstance(timestamp, float) and not timestamp.is_integer():
            raise ValueError(f"non-integer timestamp {timestamp!r}")
        if ts < 0:
            raise ValueError(f"negative timestamp {ts}")
        dn = normalize_domain(str(domain))
        if not dn or not _DOMAIN_RE.match(dn):
            raise ValueError(f"invalid domain {domain!r}")
        qtype = query_type if isinstance(query_type, QueryType) else QueryType.parse(str(query_type))
        ips = _unique(str(ipaddress.ip_address(ip.strip())) for ip in resolved_ips if ip.strip())
        ns = []
        for host in name_servers:
            host = normalize_domain(host)
            if not host:
                continue
            if not _DOMAIN_RE.match(host):
                raise ValueError(f"invalid name server {host!r}")
            ns.append(host)
        return cls(ts, dn, qtype, ips, _unique(ns))


def _unique(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


@dataclass
class ParsedLog:
    records: list[DnsQueryRecord]
    malformed: int = 0
    malformed_lines: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _open_text(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, encoding="utf-8", newline="")
        except OSError as exc:
            raise InputError(f"cannot read DNS log {source}: {exc}") from exc
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _split_multi(cell: str) -> list[str]:
    return [part for part in cell.split(MULTI_SEP) if part.strip()]


def parse_dns_log(source, format: str = "csv") -> ParsedLog:
    """Parse a csv or jsonl query log from a path, bytes, or binary stream.

    Malformed lines are skipped and counted. If more than half of the data lines
    are malformed the format choice is assumed wrong and FormatError is raised.
    """
    if format not in ("csv", "jsonl"):
        raise FormatError(f"unknown log format {format!r}")
    stream = _open_text(source)
    try:
        try:
            lines = stream.read().splitlines()
        except UnicodeDecodeError as exc:
            raise InputError(f"DNS log is not valid UTF-8: {exc}") from exc
    finally:
        if isinstance(source, (str, os.PathLike)):
            stream.close()

    records: list[DnsQueryRecord] = []
    bad: list[int] = []
    if format == "csv":
        if not lines:
            raise FormatError("csv log has no header row")
        header = tuple(h.strip() for h in next(csv.reader([lines[0]])))
        if header != CSV_COLUMNS:
            raise FormatError(f"csv header {header} != {CSV_COLUMNS}")
        body = enumerate(lines[1:], start=2)
    else:
        body = enumerate(lines, start=1)

    for lineno, line in body:
        if not line.strip():
            continue
        try:
            if format == "csv":
                cells = next(csv.reader([line]))
                if len(cells) != len(CSV_COLUMNS):
                    raise ValueError(f"expected {len(CSV_COLUMNS)} cells, got {len(cells)}")
                ts, dn, qt, ips, ns = cells
                rec = DnsQueryRecord.build(ts.strip(), dn, qt, _split_multi(ips), _split_multi(ns))
            else:
                obj = json.loads(line)
                ips, ns = obj["resolved_ips"], obj["name_servers"]
                if not isinstance(ips, list) or not isinstance(ns, list):
                    raise ValueError("multi-valued fields must be arrays")
                if isinstance(obj["timestamp"], bool):
                    raise ValueError("boolean timestamp")
                rec = DnsQueryRecord.build(obj["timestamp"], obj["domain"], obj["query_type"],
                                           [str(x) for x in ips], [str(x) for x in ns])
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            log.debug("malformed line %d: %s", lineno, exc)
            bad.append(lineno)
            continue
        records.append(rec)

    total = len(records) + len(bad)
    if total and len(bad) / total > MAX_MALFORMED_FRACTION:
        raise FormatError(f"{len(bad)} of {total} lines malformed; is the format really {format}?")
    if bad:
        log.warning("skipped %d malformed line(s)", len(bad))
    return ParsedLog(records, len(bad), bad)


def write_dns_log(records: Iterable[DnsQueryRecord], stream: IO[str], format: str = "csv") -> None:
    """Serialize records in the same schema ``parse_dns_log`` reads."""
    if format == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([r.timestamp, r.domain, r.query_type.value,
                             MULTI_SEP.join(r.resolved_ips), MULTI_SEP.join(r.name_servers)])
    elif format == "jsonl":
        for r in records:
            stream.write(json.dumps({
                "timestamp": r.timestamp, "domain": r.domain, "query_type": r.query_type.value,
                "resolved_ips": list(r.resolved_ips), "name_servers": list(r.name_servers),
            }) + "\n")
    else:
        raise FormatError(f"unknown log format {format!r}")


class Label(str, enum.Enum):
    BENIGN = "benign"
    MALICIOUS = "malicious"
    CRYPTOJACKED = "cryptojacked"
    UNMARKED = "unmarked"


_PRECEDENCE = {Label.BENIGN: 1, Label.MALICIOUS: 2, Label.CRYPTOJACKED: 3}


class LabelMap:
    """Registered domain -> label. Subdomains inherit the label of their registered domain."""

    def __init__(self, entries: dict[str, Label] | None = None):
        self.entries: dict[str, Label] = {}
        for dn, label in (entries or {}).items():
            self.add(dn, Label(label))

    @classmethod
    def from_lists(cls, benign=(), malicious=(), cryptojacked=()):
        lm = cls()
        for label, names in ((Label.BENIGN, benign), (Label.MALICIOUS, malicious),
                             (Label.CRYPTOJACKED, cryptojacked)):
            for dn in names:
                lm.add(dn, label)
        return lm

    def add(self, dn: str, label: Label) -> None:
        key = registered_domain(normalize_domain(dn))
        current = self.entries.get(key)
        if current is None or _PRECEDENCE[label] > _PRECEDENCE[current]:
            self.entries[key] = label

    def label(self, dn: str) -> Label:
        dn = normalize_domain(dn)
        hit = self.entries.get(registered_domain(dn))
        if hit is None:
            hit = self.entries.get(dn)
        return hit if hit is not None else Label.UNMARKED

    __getitem__ = label

    def is_known_malicious(self, dn: str) -> bool:
        return self.label(dn) in (Label.MALICIOUS, Label.CRYPTOJACKED)

    def __len__(self):
        return len(self.entries)


def read_domain_list(path, name: str = "domain") -> list[str]:
    """Newline-delimited names; blank lines and ``#`` comments are ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {name} list {path}: {exc}") from exc
    names = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            names.append(normalize_domain(line))
    return names


def load_label_lists(benign, malicious, cryptojacked) -> LabelMap:
    return LabelMap.from_lists(
        benign=read_domain_list(benign, "benign"),
        malicious=read_domain_list(malicious, "malicious"),
        cryptojacked=read_domain_list(cryptojacked, "cryptojacked"),
    )


@dataclass(frozen=True)
class Granularity:
    """Fixed-width windows of ``hours`` hours, or the whole span when ``hours`` is None."""

    hours: int | None = None

    @classmethod
    def fixed(cls, hours: int) -> "Granularity":
        if int(hours) <= 0:
            raise ValueError("window width must be positive")
        return cls(int(hours))

    @classmethod
    def parse(cls, text) -> "Granularity":
        text = str(text).strip().upper()
        if text == "ALL":
            return ALL
        return cls.fixed(int(text.rstrip("H")))

    @property
    def label(self) -> str:
        return "ALL" if self.hours is None else f"{self.hours}H"

    def __str__(self):
        return self.label


ALL = Granularity(None)


@dataclass(frozen=True)
class TimeWindow:
    index: int
    start: int
    end: int
    granularity: Granularity


Segmentation = list[tuple[TimeWindow, list[DnsQueryRecord]]]


def segment(records: Sequence[DnsQueryRecord], granularity: Granularity) -> Segmentation:
    """Partition records into contiguous windows covering the dataset span.

    Fixed-width windows start at the earliest timestamp floored to the hour, and
    empty windows inside the span are kept so every DN sees the same timeline.
    """
    if not records:
        return []
    ordered = sorted(records, key=lambda r: r.timestamp)
    first, last = ordered[0].timestamp, ordered[-1].timestamp
    if granularity.hours is None:
        return [(TimeWindow(0, first, last + 1, granularity), ordered)]
    width = 3600 * granularity.hours
    origin = first - first % 3600
    n_windows = (last - origin) // width + 1
    buckets: list[list[DnsQueryRecord]] = [[] for _ in range(n_windows)]
    for r in ordered:
        buckets[(r.timestamp - origin) // width].append(r)
    return [(TimeWindow(i, origin + i * width, origin + (i + 1) * width, granularity), bucket)
            for i, bucket in enumerate(buckets)]
