"""WHOIS records and the shared-infrastructure graph built from them."""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Iterable

from ..dngraph import DN, build_snapshot, connected_components
from ..errors import InputError, ParseError
from ..ingest import DnsQueryRecord

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")
_LIST_FIELDS = ("a_records", "aaaa_records", "ns", "mx", "txt", "cname", "dname", "soa")


def _date(value) -> date | None:
    if value in (None, ""):
        return None
    if isinstance(value, date):
        return value
    return datetime.fromisoformat(str(value).replace("Z", "+00:00")).date()


@dataclass(frozen=True)
class WhoisRecord:
    dn: str
    subdomain: str = ""
    registered_domain: str = ""
    creation_date: date | None = None
    updated_date: date | None = None
    age: int | None = None
    last_updated_age: int | None = None
    country: str | None = None
    a_records: tuple[str, ...] = ()
    aaaa_records: tuple[str, ...] = ()
    ns: tuple[str, ...] = ()
    mx: tuple[str, ...] = ()
    txt: tuple[str, ...] = ()
    cname: tuple[str, ...] = ()
    dname: tuple[str, ...] = ()
    soa: tuple[str, ...] = ()

    def __post_init__(self):
        if self.country is not None and not _COUNTRY_RE.match(self.country):
            raise ValueError(f"country {self.country!r} is not an alpha-2 code")
        if self.age is not None and self.last_updated_age is not None:
            if not self.age >= self.last_updated_age >= 0:
                raise ValueError("need age >= last_updated_age >= 0")

    @classmethod
    def from_dict(cls, obj: dict, as_of: date | None = None) -> "WhoisRecord":
        """Build from a json object; ages are derived from dates when missing and ``as_of`` is given."""
        created, updated = _date(obj.get("creation_date")), _date(obj.get("updated_date"))
        age, upd_age = obj.get("age"), obj.get("last_updated_age")
        if as_of is not None:
            if age is None and created is not None:
                age = (as_of - created).days
            if upd_age is None and updated is not None:
                upd_age = (as_of - updated).days
        country = obj.get("country") or None
        lists = {}
        for name in _LIST_FIELDS:
            value = obj.get(name) or ()
            lists[name] = (value,) if isinstance(value, str) else tuple(str(v) for v in value)
        return cls(
            dn=str(obj["dn"]).strip().lower().rstrip("."),
            subdomain=obj.get("subdomain") or "",
            registered_domain=obj.get("registered_domain") or "",
            creation_date=created,
            updated_date=updated,
            age=None if age is None else int(age),
            last_updated_age=None if upd_age is None else int(upd_age),
            country=None if country is None else str(country).strip().upper(),
            **lists,
        )


def read_whois_jsonl(path, as_of: date | None = None) -> list[WhoisRecord]:
    records = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(WhoisRecord.from_dict(json.loads(line), as_of))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ParseError(f"bad whois record: {exc}", lineno) from exc
    except OSError as exc:
        raise InputError(f"cannot read whois file {path}: {exc}") from exc
    return records


@dataclass
class WhoisGraph:
    components: list[frozenset[str]]
    country_tally: dict[str, int] = field(default_factory=dict)
    absent_country: int = 0

    def to_components_dict(self) -> dict:
        return {"n_components": len(self.components),
                "components": [sorted(c) for c in self.components]}

    def to_tally_dict(self) -> dict:
        return {"countries": self.country_tally, "absent": self.absent_country}


def build_whois_graph(records: Iterable[WhoisRecord]) -> WhoisGraph:
    """Connect DNs through shared A/AAAA addresses and name servers.

    Components are DN sets, largest first; the tally counts records per country
    with records lacking one counted separately.
    """
    records = list(records)
    rows = [DnsQueryRecord.build(0, r.dn, "A", r.a_records + r.aaaa_records, r.ns) for r in records]
    snap = build_snapshot(rows)
    comps = []
    for comp in connected_components(snap):
        dns = frozenset(n.key for n in comp if n.type == DN)
        if dns:
            comps.append(dns)
    comps.sort(key=lambda c: (-len(c), min(c)))
    tally = Counter(r.country for r in records if r.country)
    absent = sum(1 for r in records if not r.country)
    return WhoisGraph(comps, dict(sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))), absent)
