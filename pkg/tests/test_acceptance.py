"""Acceptance criteria. Each test prints one PASS/FAIL line, then asserts."""
import json
import random
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from dnsjack.audit import (cluster_resource_profiles, collect_documents, load_corpus, load_signatures,
                           parse_resource_capture, scan_signatures)
from dnsjack.dngraph import build_snapshot, connected_components, snapshot_metrics
from dnsjack.features import burst_features
from dnsjack.ingest import DnsQueryRecord, LabelMap
from dnsjack.ml import (PRESETS, cluster_window, flag_suspicious, metrics_from_confusion,
                        score_malicious_probability, train_decision_tree)
from dnsjack.statfit import (EXPONENTIAL, LOGNORMAL, POWERLAW, TRUNCATED_POWERLAW, FitResult, fit_distribution,
                             kl_divergence, kl_divergence_discrete, select_best_fit)

from oracles import (adjacency, all_pairs_diameter, burst_scan, exhaustive_root_split, random_records,
                     union_find_components)
from synth import resource_profiles, window_matrices

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


def exp_sample(rng, n, lam=0.0852):
    return 1.0 + rng.exponential(1 / lam, n)


def lognormal_sample(rng, n, mu=1.7092, sigma=1.4067):
    parts, have = [], 0
    while have < n:
        x = rng.lognormal(mu, sigma, n)
        x = x[x >= 1.0]
        parts.append(x)
        have += len(x)
    return np.concatenate(parts)[:n]


@pytest.mark.slow
def test_distribution_recovery(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(2020)
    lam = fit_distribution(exp_sample(rng, 20000), EXPONENTIAL, x_min=1.0).params["lambda"]
    ln = fit_distribution(lognormal_sample(rng, 20000), LOGNORMAL, x_min=1.0).params
    errors = {"lambda": abs(lam / 0.0852 - 1), "mu": abs(ln["mu"] / 1.7092 - 1),
              "sigma": abs(ln["sigma"] / 1.4067 - 1)}
    picks = {}
    for family, gen in ((EXPONENTIAL, exp_sample), (LOGNORMAL, lognormal_sample)):
        picks[family] = sum(getattr(select_best_fit(gen(np.random.default_rng(seed), 20000)), "family", None) == family
                            for seed in range(100))
    elapsed = time.perf_counter() - t
    ok = max(errors.values()) <= 0.05 and min(picks.values()) >= 95 and elapsed < 60
    verdict("distribution recovery", ok,
            f"relative errors {({k: round(v, 4) for k, v in errors.items()})}, "
            f"correct selections {picks} of 100, {elapsed:.1f}s")


def random_fit(rng):
    x_min = float(rng.uniform(1, 5))
    x_max = x_min + float(rng.uniform(1, 300))
    family = rng.choice([EXPONENTIAL, LOGNORMAL, POWERLAW, TRUNCATED_POWERLAW])
    params = {EXPONENTIAL: lambda: {"lambda": float(rng.uniform(1e-3, 2))},
              LOGNORMAL: lambda: {"mu": float(rng.uniform(-5, 5)), "sigma": float(rng.uniform(0.1, 3))},
              POWERLAW: lambda: {"alpha": float(rng.uniform(1.05, 5))},
              TRUNCATED_POWERLAW: lambda: {"alpha": float(rng.uniform(0, 4)), "lambda": float(rng.uniform(1e-3, 1))},
              }[family]()
    return FitResult(str(family), x_min, params, 0.0, 0.0, 100, x_max)


def test_kld_properties(verdict):
    rng = np.random.default_rng(7)
    pairs = [(random_fit(rng), random_fit(rng)) for _ in range(1000)]
    worst_neg = min(kl_divergence(p, q) for p, q in pairs)
    worst_self = max(abs(kl_divergence(p, p)) for p, _ in pairs)
    hand = kl_divergence_discrete([0.5, 0.5], [0.25, 0.75])
    ok = worst_neg >= 0 and worst_self <= 1e-9 and abs(hand - 0.1438) <= 1e-4
    verdict("KLD properties", ok, f"min KLD {worst_neg:.3g}, max |KLD(p,p)| {worst_self:.3g}, hand case {hand:.6f}")


def graph_matches_oracle(rows):
    snap = build_snapshot([DnsQueryRecord.build(*r) for r in rows])
    nodes, edges = set(), set()
    for _, dn, _, ips, ns in rows:
        nodes.add(("dn", dn))
        for ip in ips:
            nodes.add(("ip", ip))
            edges.add((("dn", dn), ("ip", ip)))
        for host in ns:
            nodes.add(("ns", host))
            edges.add((("dn", dn), ("ns", host)))
    adj = adjacency(edges)
    for n in nodes:
        adj[n]
    for _, dn in (n for n in nodes if n[0] == "dn"):
        if snapshot_metrics(snap, dn) != (len(adj[("dn", dn)]), all_pairs_diameter(adj, ("dn", dn))):
            return False, len(nodes)
    got = {frozenset(tuple(n) for n in c) for c in connected_components(snap)}
    return got == union_find_components(nodes, edges), len(nodes)


def test_graph_oracle_equivalence(verdict):
    rng = random.Random(500)
    failures, largest = 0, 0
    for _ in range(500):
        rows = random_records(rng, rng.randrange(1, 40), n_dns=15, n_ips=8, n_ns=10)  # at most 15 + 24 + 10 nodes
        ok, n_nodes = graph_matches_oracle(rows)
        failures += not ok
        largest = max(largest, n_nodes)
    verdict("graph oracle equivalence", failures == 0 and largest <= 50,
            f"{failures} mismatches over 500 snapshots, largest {largest} nodes")


def test_burst_oracle(verdict):
    rng = np.random.default_rng(1000)
    mismatches = scale_breaks = 0
    for _ in range(1000):
        series = rng.integers(0, int(rng.integers(1, 500)), int(rng.integers(1, 60))).tolist()
        frac = float(rng.choice([0.8, 0.5, 0.25, 0.9, 1.0]))
        mismatches += burst_features(series, frac) != burst_scan(series, frac)
        factor = int(rng.integers(1, 100))
        scale_breaks += burst_features([c * factor for c in series])[0] != burst_features(series)[0]
    verdict("burst oracle", mismatches == 0 and scale_breaks == 0,
            f"{mismatches} oracle mismatches, {scale_breaks} scale-invariance breaks over 1000 series")


@pytest.mark.slow
def test_unsupervised_pipeline(verdict):
    t = time.perf_counter()
    windows, planted, labeled, benign = window_matrices(seed=0)
    labels = LabelMap({dn: "malicious" for dn in labeled})
    clusterings = [cluster_window(i, dns, m) for i, (dns, m) in enumerate(windows)]
    scores = score_malicious_probability([(c.dns, c.model) for c in clusterings], labels)
    flagged = {s.dn for s in flag_suspicious(scores, 0.99)}
    prob = {s.dn: s.probability for s in scores}
    elapsed = time.perf_counter() - t
    planted_ok = all(prob[dn] == 1.0 for dn in planted) and set(planted) <= flagged
    false_rate = len(flagged & set(benign)) / len(benign)
    ok = planted_ok and false_rate <= 0.02 and elapsed < 300
    verdict("unsupervised pipeline", ok,
            f"{sum(prob[dn] == 1.0 for dn in planted)}/20 planted at 1.0, "
            f"{len(set(planted) & flagged)}/20 flagged, false flag rate {false_rate:.4f}, {elapsed:.1f}s")


def test_tree_contract(verdict):
    hp = PRESETS["paper"]
    rng = np.random.default_rng(55)
    depth_max, leaf_min = 0, None
    for _ in range(50):
        n, d = int(rng.integers(100, 2000)), int(rng.integers(1, 20))
        X = rng.normal(size=(n, d))
        y = (X @ rng.normal(size=d) + rng.normal(0, 1, n) > 0).astype(int)
        tree = train_decision_tree(X, y, hp)
        depth_max = max(depth_max, tree.depth)
        rows_per_leaf = Counter(tree.apply(X).tolist())
        smallest = min(rows_per_leaf.values())
        leaf_min = smallest if leaf_min is None else min(leaf_min, smallest)
    root_mismatch = 0
    for _ in range(100):
        n, d = int(rng.integers(30, 201)), int(rng.integers(1, 5))
        X = rng.integers(0, 15, (n, d)).astype(float)
        y = (X[:, 0] + rng.integers(0, 8, n) > 10).astype(int)
        if len(set(y.tolist())) < 2:
            continue
        root = train_decision_tree(X, y, hp).nodes[0]
        best = exhaustive_root_split(X.tolist(), y.tolist(), hp.min_samples_leaf, hp.criterion)
        if best is None or float(best[0]) >= root.impurity - 1e-12:
            root_mismatch += not root.is_leaf
        else:
            _, f, lo, hi = best
            root_mismatch += not (root.feature == f and lo <= root.threshold < hi)
    ok = depth_max <= 10 and leaf_min >= 13 and root_mismatch == 0
    verdict("tree contract", ok,
            f"max depth {depth_max}, smallest leaf {leaf_min} rows, {root_mismatch} root-split mismatches")


def test_metrics_algebra(verdict):
    m = metrics_from_confusion([[90, 10], [40, 60]])
    ok = m.balanced_accuracy == 0.75 and m.recall[1] == 0.6 and m.precision[1] == 6 / 7
    verdict("metrics algebra", ok,
            f"balanced accuracy {m.balanced_accuracy}, recall {m.recall[1]}, precision {m.precision[1]!r}")


@pytest.mark.slow
def test_resource_clustering_pattern(verdict):
    t = time.perf_counter()
    profiles = resource_profiles(seed=0)
    res = cluster_resource_profiles(profiles)
    elapsed = time.perf_counter() - t
    outliers = sorted(p.url for p in profiles if "//out" in p.url)
    sizes = res.model.sizes().tolist()
    minority = sorted(profiles[i].url for i in np.flatnonzero(res.model.labels == int(np.argmin(sizes))))
    score = res.silhouette_table[res.model.k]
    ok = res.model.k == 2 and minority == outliers and score > 0.9 and elapsed < 120
    verdict("resource clustering pattern", ok,
            f"k={res.model.k}, sizes {sizes}, minority matches planted: {minority == outliers}, "
            f"silhouette {score:.4f}, {elapsed:.1f}s")


def test_parser_bit_exactness(verdict):
    expected = json.loads((FIXTURES / "captures" / "expected.json").read_text())
    bad = []
    for name, case in expected.items():
        got = parse_resource_capture((FIXTURES / "captures" / name).read_text(), case["kind"])
        if got != case["measures"]:
            bad.append(name)
        if case["kind"] == "cpu_stat" and abs(sum(got.values()) - 100) > 0.5:
            bad.append(name + " cpu sum")
        if case["kind"] == "packet_summary" and got["pkt_total"] != got["pkt_send"] + got["pkt_rec"] + got["pkt_oth"]:
            bad.append(name + " pkt_total")
    kinds = sorted({s["kind"] for s in expected.values()})
    verdict("parser bit-exactness", not bad and len(kinds) == 4,
            f"{len(expected)} fixtures over {kinds}, problems {bad}")


def test_signature_scan(verdict):
    corpus = FIXTURES / "corpus"
    docs, _ = collect_documents((corpus / "urls.txt").read_text().split(), load_corpus(corpus))
    hits = scan_signatures(docs, load_signatures(corpus / "signatures.txt"))
    got = Counter((h.url, h.signature, h.source) for h in hits)
    want = Counter({("http://gov-a.example/", "coinhive", "html"): 1, ("http://gov-a.example/", "coinhive", "script"): 1,
                    ("http://gov-b.example/", "monero", "html"): 1, ("http://gov-b.example/", "jsecoin", "html"): 1,
                    ("http://gov-c.example/", "cryptoloot", "html"): 1,
                    ("http://gov-c.example/", "miner.start(", "html"): 1,
                    ("http://gov-c.example/", "monero", "script"): 1})
    font = [h for h in hits if h.signature == "monero" and "font-family" in h.context]
    ok = got == want and len(font) == 1
    verdict("signature scan", ok, f"{len(hits)} hits (7 planted), font-family triage context found: {bool(font)}")
