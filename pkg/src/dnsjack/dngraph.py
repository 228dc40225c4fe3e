"""Per-window tripartite DN-IP-NS graphs: degree, component diameter, components."""
from __future__ import annotations

from collections import deque
from typing import Iterable, NamedTuple

import numpy as np

from . import kernels
from .errors import NodeNotFound

DN, IP, NS = "dn", "ip", "ns"
NODE_TYPES = (DN, IP, NS)

# Components larger than this get a double-sweep lower bound instead of exact all-pairs BFS.
EXACT_DIAMETER_LIMIT = 10_000


class Node(NamedTuple):
    type: str
    key: str

    def __str__(self):
        return f"{self.type}:{self.key}"

    @classmethod
    def parse(cls, text: str) -> "Node":
        kind, _, key = text.partition(":")
        if kind not in NODE_TYPES or not key:
            raise ValueError(f"bad node {text!r}")
        return cls(kind, key)


class Diameter(NamedTuple):
    value: int
    exact: bool


class DnGraphSnapshot:
    """Immutable undirected graph whose edges always join a DN node to an IP or NS node."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[tuple[Node, Node]], window_index: int = 0):
        self.window_index = window_index
        self.nodes: frozenset[Node] = frozenset(nodes)
        canon = set()
        for a, b in edges:
            if a.type != DN:
                a, b = b, a
            if a.type != DN or b.type == DN:
                raise ValueError(f"edge {a}--{b} must join a DN to an IP or NS")
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge {a}--{b} references an unknown node")
            canon.add((a, b))
        self.edges: frozenset[tuple[Node, Node]] = frozenset(canon)
        self._csr = None
        self._component_of = None
        self._components = None
        self._diameters: dict[int, Diameter] = {}

    def __contains__(self, node):
        return node in self.nodes

    def __repr__(self):
        return f"DnGraphSnapshot(window={self.window_index}, nodes={len(self.nodes)}, edges={len(self.edges)})"

    def _build_csr(self):
        if self._csr is None:
            order = sorted(self.nodes)
            index = {node: i for i, node in enumerate(order)}
            n = len(order)
            deg = np.zeros(n + 1, dtype=np.int64)
            pairs = np.array([(index[a], index[b]) for a, b in self.edges], dtype=np.int64).reshape(-1, 2)
            both = np.concatenate([pairs, pairs[:, ::-1]])
            both = both[np.lexsort((both[:, 1], both[:, 0]))]
            np.add.at(deg, both[:, 0] + 1, 1)
            self._csr = (order, index, np.cumsum(deg), both[:, 1].copy())
        return self._csr

    def degree(self, node: Node) -> int:
        order, index, indptr, _ = self._build_csr()
        i = index.get(node)
        if i is None:
            raise NodeNotFound(node)
        return int(indptr[i + 1] - indptr[i])

    def neighbors(self, node: Node) -> list[Node]:
        order, index, indptr, indices = self._build_csr()
        i = index[node]
        return [order[j] for j in indices[indptr[i]:indptr[i + 1]]]

    def _label_components(self):
        if self._component_of is None:
            order, _, indptr, indices = self._build_csr()
            comp = np.full(len(order), -1, dtype=np.int64)
            members: list[list[int]] = []
            for start in range(len(order)):
                if comp[start] >= 0:
                    continue
                cid = len(members)
                comp[start] = cid
                group = [start]
                queue = deque([start])
                while queue:
                    u = queue.popleft()
                    for v in indices[indptr[u]:indptr[u + 1]]:
                        if comp[v] < 0:
                            comp[v] = cid
                            group.append(int(v))
                            queue.append(v)
                members.append(group)
            self._component_of = comp
            self._components = members
        return self._component_of, self._components

    def component_diameter(self, node: Node) -> Diameter:
        """Longest shortest path in ``node``'s component; approximate above EXACT_DIAMETER_LIMIT."""
        order, index, indptr, indices = self._build_csr()
        i = index.get(node)
        if i is None:
            raise NodeNotFound(node)
        comp, members = self._label_components()
        cid = int(comp[i])
        if cid not in self._diameters:
            group = np.asarray(members[cid], dtype=np.int64)
            if len(group) <= EXACT_DIAMETER_LIMIT:
                value = int(kernels.eccentricities(indptr, indices, group).max())
                self._diameters[cid] = Diameter(value, True)
            else:
                self._diameters[cid] = Diameter(_double_sweep(indptr, indices, int(group[0])), False)
        return self._diameters[cid]


def _double_sweep(indptr, indices, start: int) -> int:
    far = _farthest(indptr, indices, start)
    return int(kernels.eccentricities(indptr, indices, np.array([far]))[0])


def _farthest(indptr, indices, start: int) -> int:
    dist = {start: 0}
    queue = deque([start])
    last = start
    while queue:
        u = queue.popleft()
        last = u
        for v in indices[indptr[u]:indptr[u + 1]]:
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return last


def build_snapshot(window_records, window_index: int = 0) -> DnGraphSnapshot:
    """Link each queried DN to every IP it resolved to and every NS serving it."""
    nodes: set[Node] = set()
    edges: set[tuple[Node, Node]] = set()
    for rec in window_records:
        dn = Node(DN, rec.domain)
        nodes.add(dn)
        for ip in rec.resolved_ips:
            other = Node(IP, ip)
            nodes.add(other)
            edges.add((dn, other))
        for ns in rec.name_servers:
            other = Node(NS, ns)
            nodes.add(other)
            edges.add((dn, other))
    return DnGraphSnapshot(nodes, edges, window_index)


def snapshot_metrics(snapshot: DnGraphSnapshot, dn: str) -> tuple[int, int]:
    """(degree, component diameter) of a DN; raises NodeNotFound when absent."""
    node = Node(DN, dn)
    if node not in snapshot.nodes:
        raise NodeNotFound(f"{dn} not in window {snapshot.window_index}")
    return snapshot.degree(node), snapshot.component_diameter(node).value


def connected_components(snapshot: DnGraphSnapshot) -> list[frozenset[Node]]:
    """Maximal connected node sets, largest first; ties by smallest member."""
    order, *_ = snapshot._build_csr()
    _, members = snapshot._label_components()
    comps = [frozenset(order[i] for i in group) for group in members]
    return sorted(comps, key=lambda c: (-len(c), min(str(n) for n in c)))


def export_edge_list(snapshot: DnGraphSnapshot, stream) -> None:
    """Write ``type:key<TAB>type:key`` lines, sorted; isolated nodes get a line of their own."""
    for a, b in sorted(snapshot.edges):
        stream.write(f"{a}\t{b}\n")
    linked = {n for edge in snapshot.edges for n in edge}
    for node in sorted(snapshot.nodes - linked):
        stream.write(f"{node}\n")


def read_edge_list(stream, window_index: int = 0) -> DnGraphSnapshot:
    nodes, edges = set(), set()
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        parts = [Node.parse(part) for part in line.split("\t")]
        nodes.update(parts)
        if len(parts) == 2:
            edges.add((parts[0], parts[1]))
    return DnGraphSnapshot(nodes, edges, window_index)
