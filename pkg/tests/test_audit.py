import json
import random
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dnsjack.audit import (KINDS, MEASURES, Document, MappingFetcher, ResourceProfile, WhoisRecord,
                           build_resource_profile, build_whois_graph, bundled_signatures,
                           cluster_resource_profiles, collect_documents, flagged_urls, load_corpus,
                           load_signatures, parse_resource_capture, read_whois_jsonl, scan_signatures,
                           script_sources)
from dnsjack.audit.resources import CPU_MEASURES, IncompleteCaptureError
from dnsjack.errors import DegenerateDataError, FormatError, InputError, ParameterError, ParseError

from oracles import union_find_components

FIXTURES = Path(__file__).parent / "fixtures"
CAPTURES = FIXTURES / "captures"
CORPUS = FIXTURES / "corpus"

PLANTED = Counter({
    ("http://gov-a.example/", "coinhive", "html", None): 1,
    ("http://gov-a.example/", "coinhive", "script", "http://gov-a.example/js/coinhive.min.js"): 1,
    ("http://gov-b.example/", "monero", "html", None): 1,
    ("http://gov-b.example/", "jsecoin", "html", None): 1,
    ("http://gov-c.example/", "cryptoloot", "html", None): 1,
    ("http://gov-c.example/", "miner.start(", "html", None): 1,
    ("http://gov-c.example/", "monero", "script", "https://cdn.other.example/lib.js"): 1,
})


def planted_scan():
    urls = (CORPUS / "urls.txt").read_text().split()
    docs, failures = collect_documents(urls, load_corpus(CORPUS))
    return docs, failures, scan_signatures(docs, load_signatures(CORPUS / "signatures.txt"))


def test_coinhive_hit_with_context():
    (hit,) = scan_signatures([Document("u", "html", b'<script src="/coinhive.min.js">')], ["coinhive"])
    assert hit.offset == 14 and "coinhive.min.js" in hit.context


def test_monero_font_family_context():
    body = b"h1 { font-family: Monero-Regular, serif; }"
    (hit,) = scan_signatures([("u", "html", body)], ["monero"])
    assert "font-family" in hit.context
    assert body[hit.offset:hit.offset + 6].lower() == b"monero"


def test_planted_corpus_exact_hit_set():
    docs, failures, hits = planted_scan()
    assert failures == []
    assert len(hits) == 7
    assert Counter((h.url, h.signature, h.source, h.script_url) for h in hits) == PLANTED
    bodies = {(d.url, d.source, d.script_url): d.body for d in docs}
    for h in hits:
        body = bodies[(h.url, h.source, h.script_url)]
        assert body[h.offset:h.offset + len(h.signature)].decode().lower() == h.signature
    (font,) = [h for h in hits if h.signature == "monero" and h.source == "html"]
    assert "font-family" in font.context
    assert flagged_urls(hits) == ["http://gov-a.example/", "http://gov-b.example/", "http://gov-c.example/"]


def test_clean_corpus_has_no_hits_and_reports_missing_script():
    docs, failures = collect_documents(["http://clean.example/"], load_corpus(FIXTURES / "clean_corpus"))
    assert [d.source for d in docs] == ["html"]
    assert failures and failures[0][0] == "http://clean.example/app.js"
    assert scan_signatures(docs, bundled_signatures()) == []


@given(st.randoms())
def test_hit_count_invariant_under_document_order(rnd):
    docs, _, hits = planted_scan()
    shuffled = docs[:]
    rnd.shuffle(shuffled)
    again = scan_signatures(shuffled, load_signatures(CORPUS / "signatures.txt"))
    assert Counter(again) == Counter(hits)


def test_overlapping_and_binary_bodies():
    hits = scan_signatures([("u", "script", b"coincoin\xff\xfe")], ["coin", "oinc"])
    assert sorted((h.signature, h.offset) for h in hits) == [("coin", 0), ("coin", 4), ("oinc", 1)]
    assert all("�" in h.context for h in hits)
    with pytest.raises(ParameterError):
        scan_signatures([("u", "html", b"x")], [])


def test_bundled_signatures_seeded():
    sigs = bundled_signatures()
    assert {"coinhive", "monero", "coin", "cryptoloot", "jsecoin"} <= set(sigs)
    assert len(sigs) == len(set(sigs))


def test_script_sources():
    html = b'<script src="a.js"></script><script src="//cdn.x/b.js"></script><script src="javascript:void(0)">'
    assert script_sources(html, "https://site.example/p/") == ["https://site.example/p/a.js", "https://cdn.x/b.js"]


def test_missing_corpus_is_input_error(tmp_path):
    with pytest.raises(InputError):
        load_corpus(tmp_path)
    with pytest.raises(OSError):
        MappingFetcher({}).fetch("http://x/")


# resource captures

def test_capture_fixtures_bit_exact():
    expected = json.loads((CAPTURES / "expected.json").read_text())
    for name, case in expected.items():
        got = parse_resource_capture((CAPTURES / name).read_text(), case["kind"])
        assert got == case["measures"], name
        if case["kind"] == "cpu_stat":
            assert abs(sum(got.values()) - 100) <= 0.5
        if case["kind"] == "packet_summary":
            assert got["pkt_total"] == got["pkt_send"] + got["pkt_rec"] + got["pkt_oth"]


@pytest.mark.parametrize("kind,text,error", [
    ("cpu_stat", "%user %nice %system %iowait %idle\n1 0 0 0 99\n", FormatError),
    ("cpu_stat", "%user %nice %system %iowait %steal %idle\n1 0 x 0 0 99\n", ParseError),
    ("cpu_stat", "%user %nice %system %iowait %steal %idle\n10 0 0 0 0 50\n", ParseError),
    ("device_stat", "Device tps rkB/s wkB/s kB_read kB_wrtn\nsda 1 1 1 1 1\n", FormatError),
    ("device_stat", "Device tps kB_read/s kB_wrtn/s kB_read kB_wrtn\nsdb 1 1 1 1 1\n", FormatError),
    ("device_stat", "Device tps kB_read/s kB_wrtn/s kB_read kB_wrtn\nsda 1 1 1 -1 1\n", ParseError),
    ("disk_net_stat", "disk_read,disk_write,net_recv\n1,2,3\n", FormatError),
    ("packet_summary", "pkt_send,pkt_rec,pkt_oth\n1,two,3\n", ParseError),
    ("packet_summary", "pkt_send,pkt_rec,pkt_oth\n1,2,3\n4,5,6\n", FormatError),
    ("vmstat", "", ParameterError),
])
def test_capture_errors(kind, text, error):
    with pytest.raises(error):
        parse_resource_capture(text, kind)


def test_parse_error_names_line():
    with pytest.raises(ParseError) as info:
        parse_resource_capture("\n%user %nice %system %iowait %steal %idle\n1 0 x 0 0 99\n", "cpu_stat")
    assert info.value.line == 3


def fixture_set():
    expected = json.loads((CAPTURES / "expected.json").read_text())
    chosen = {"cpu_stat": "cpu_stat_iostat.txt", "device_stat": "device_stat_colon.txt",
              "disk_net_stat": "disk_net_stat.csv", "packet_summary": "packet_summary.csv"}
    texts = {k: (CAPTURES / f).read_text() for k, f in chosen.items()}
    merged = {}
    for f in chosen.values():
        merged.update(expected[f]["measures"])
    return texts, merged


def test_profile_identical_captures_idempotent():
    texts, merged = fixture_set()
    prof = build_resource_profile(texts, texts, "u")
    assert prof.measures == {m: merged[m] for m in MEASURES}
    assert prof.violations() == []


def test_profile_mean_example():
    texts, merged = fixture_set()
    a = dict(merged, cpu_user=2.0, cpu_idle=merged["cpu_idle"] + merged["cpu_user"] - 2.0)
    b = dict(merged, cpu_user=4.0, cpu_idle=merged["cpu_idle"] + merged["cpu_user"] - 4.0)
    split = lambda m: {k: m for k in KINDS}
    assert build_resource_profile(split(a), split(b)).measures["cpu_user"] == 3.0


def random_measures(rng):
    cpu = rng.dirichlet(np.ones(6)) * 100
    m = dict(zip(CPU_MEASURES, cpu.tolist()))
    for name in MEASURES[6:]:
        m[name] = float(rng.integers(0, 10**6))
    m["pkt_total"] = m["pkt_send"] + m["pkt_rec"] + m["pkt_oth"]
    return m


@given(st.integers(0, 2**32 - 1))
def test_profile_equals_elementwise_mean(seed):
    rng = np.random.default_rng(seed)
    a, b = random_measures(rng), random_measures(rng)
    prof = build_resource_profile({k: a for k in KINDS}, {k: b for k in KINDS})
    oracle = (np.array([a[m] for m in MEASURES]) + np.array([b[m] for m in MEASURES])) / 2
    assert np.array_equal(prof.vector(), oracle)
    assert prof.violations() == []


def test_incomplete_capture():
    texts, _ = fixture_set()
    partial = {k: v for k, v in texts.items() if k != "packet_summary"}
    with pytest.raises(IncompleteCaptureError):
        build_resource_profile(texts, partial)
    with pytest.raises(IncompleteCaptureError):
        build_resource_profile(partial, texts)


def test_cluster_resource_profiles_table_and_errors():
    rng = np.random.default_rng(0)
    profiles = [ResourceProfile(f"u{i}", random_measures(rng)) for i in range(60)]
    res = cluster_resource_profiles(profiles, (2, 6), seed=1)
    assert sorted(res.silhouette_table) == [2, 3, 4, 5, 6]
    assert res.model.k == max(res.silhouette_table, key=lambda k: (res.silhouette_table[k], -k))
    doc = res.to_dict([p.url for p in profiles])
    assert sum(doc["cluster_sizes"]) == 60
    with pytest.raises(ParameterError):
        cluster_resource_profiles(profiles[:6], (2, 6))
    same = [ResourceProfile(f"s{i}", profiles[0].measures) for i in range(20)]
    with pytest.raises((DegenerateDataError, ParameterError)):
        cluster_resource_profiles(same, (2, 6))


# whois

def test_whois_shared_ns_and_disjoint():
    recs = [WhoisRecord(dn, ns=("ns1.gov.example",)) for dn in ("a.gov.in", "b.gov.in", "c.gov.in")]
    g = build_whois_graph(recs)
    assert g.components == [frozenset({"a.gov.in", "b.gov.in", "c.gov.in"})]
    disjoint = [WhoisRecord(f"d{i}.in", a_records=(f"10.0.0.{i}",)) for i in range(4)]
    assert len(build_whois_graph(disjoint).components) == 4


def test_whois_record_validation_and_reader(tmp_path):
    with pytest.raises(ValueError):
        WhoisRecord("a.in", country="India")
    with pytest.raises(ValueError):
        WhoisRecord("a.in", age=5, last_updated_age=9)
    from datetime import date
    rec = WhoisRecord.from_dict({"dn": "A.in.", "creation_date": "2010-01-01", "updated_date": "2019-12-31",
                                 "country": "in", "ns": "ns.x"}, as_of=date(2020, 1, 1))
    assert (rec.dn, rec.age, rec.last_updated_age, rec.country, rec.ns) == ("a.in", 3652, 1, "IN", ("ns.x",))
    path = tmp_path / "w.jsonl"
    path.write_text('{"dn": "a.in"}\n\n{"dn": "b.in", "country": "USA"}\n')
    with pytest.raises(ParseError) as info:
        read_whois_jsonl(path)
    assert info.value.line == 3


def random_whois(rng, n):
    countries = ["IN", "US", "DE", None]
    return [WhoisRecord(f"d{rng.randrange(12)}.in",
                        a_records=tuple(f"10.0.0.{rng.randrange(10)}" for _ in range(rng.randrange(3))),
                        ns=tuple(f"ns{rng.randrange(5)}.x" for _ in range(rng.randrange(2))),
                        country=rng.choice(countries))
            for _ in range(n)]


@given(st.integers(0, 2**32 - 1))
def test_whois_components_match_union_find_and_tally(seed):
    rng = random.Random(seed)
    recs = random_whois(rng, rng.randrange(1, 20))
    g = build_whois_graph(recs)
    nodes, edges = set(), set()
    for r in recs:
        nodes.add(("dn", r.dn))
        for other in r.a_records + r.ns:
            nodes.add(("x", other))
            edges.add((("dn", r.dn), ("x", other)))
    oracle = {frozenset(k for t, k in comp if t == "dn") for comp in union_find_components(nodes, edges)}
    assert set(g.components) == oracle
    assert g.country_tally == dict(Counter(r.country for r in recs if r.country))
    assert g.absent_country == sum(r.country is None for r in recs)
    assert len(g.components) <= len({r.dn for r in recs})


@given(st.integers(0, 2**32 - 1))
def test_whois_monotone_merging(seed):
    rng = random.Random(seed)
    recs = random_whois(rng, 10)
    before = len(build_whois_graph(recs).components)
    known = sorted({r.dn for r in recs})
    extra = WhoisRecord(rng.choice(known), ns=recs[rng.randrange(10)].ns or ("ns0.x",))
    assert len(build_whois_graph(recs + [extra]).components) <= before
