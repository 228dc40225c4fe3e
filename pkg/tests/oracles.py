"""Independent brute-force reference implementations used as test oracles."""
from collections import defaultdict, deque
from decimal import Decimal
from fractions import Fraction
import math
import random

import mpmath


def adjacency(edges):
    adj = defaultdict(set)
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def bfs_distances(adj, src):
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def all_pairs_diameter(adj, node):
    """Max shortest-path length among all pairs in node's component."""
    comp = bfs_distances(adj, node)
    return max(max(bfs_distances(adj, u).values()) for u in comp)


def union_find_components(nodes, edges):
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups = defaultdict(set)
    for n in nodes:
        groups[find(n)].add(n)
    return {frozenset(g) for g in groups.values()}


def burst_scan(series, threshold_frac):
    """Decimal scan: every window compared against frac * max."""
    frac = Decimal(str(threshold_frac))
    peak = max(series)
    if peak <= 0:
        return 0, 0
    count = 0
    for c in series:
        if c > 0 and Decimal(c) >= frac * Decimal(peak):
            count += 1
    return count, peak


def gini_fraction(counts):
    n = sum(counts)
    return 1 - sum(Fraction(c, n) ** 2 for c in counts)


def entropy_float(counts):
    n = sum(counts)
    return -sum((c / n) * math.log2(c / n) for c in counts if c)


def exhaustive_root_split(X, y, min_leaf, criterion="gini"):
    """(feature, threshold) minimizing weighted child impurity; ties -> lowest feature, lowest threshold.

    Gini is evaluated in exact rationals, entropy in floats.
    """
    classes = sorted(set(y))
    n = len(y)
    best = None
    for f in range(len(X[0])):
        values = sorted(set(row[f] for row in X))
        for lo, hi in zip(values, values[1:]):
            left = [y[i] for i in range(n) if X[i][f] <= lo]
            right = [y[i] for i in range(n) if X[i][f] >= hi]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            lc = [left.count(c) for c in classes]
            rc = [right.count(c) for c in classes]
            if criterion == "gini":
                imp = (len(left) * gini_fraction(lc) + len(right) * gini_fraction(rc)) / n
            else:
                imp = (len(left) * entropy_float(lc) + len(right) * entropy_float(rc)) / n
            if best is None or imp < best[0]:
                best = (imp, f, lo, hi)
    return best


def log_upper_gamma_mp(s, z):
    with mpmath.workdps(40):
        return float(mpmath.log(mpmath.gammainc(s, z, mpmath.inf)))


def silhouette_brute(points, labels):
    n = len(points)

    def d(i, j):
        return math.dist(points[i], points[j])

    clusters = sorted(set(labels))
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            continue
        a = sum(d(i, j) for j in own) / len(own)
        b = min(sum(d(i, j) for j in range(n) if labels[j] == c) / labels.count(c)
                for c in clusters if c != labels[i])
        if max(a, b) > 0:
            total += (b - a) / max(a, b)
    return total / n


def random_records(rng: random.Random, n_records, n_dns=8, n_ips=10, n_ns=5, t_span=36000):
    """Raw field tuples for DnsQueryRecord.build."""
    out = []
    for _ in range(n_records):
        dn = f"d{rng.randrange(n_dns)}.com"
        ips = [f"10.0.{rng.randrange(3)}.{rng.randrange(n_ips)}" for _ in range(rng.randrange(3))]
        ns = [f"ns{rng.randrange(n_ns)}.host.net" for _ in range(rng.randrange(2))]
        out.append((rng.randrange(t_span), dn, rng.choice(["A", "AAAA", "NS", "MX"]), ips, ns))
    return out
