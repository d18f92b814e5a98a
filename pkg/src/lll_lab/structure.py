"""2-trees on dependency graphs, component witnesses, and the disjoint-set bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import networkx as nx


def _sort_key(x):
    return (str(type(x)), x) if not isinstance(x, (int, float)) else ("", x)


def distance_two_graph(g: nx.Graph) -> nx.Graph:
    """Graph joining vertices at distance exactly 2 in g."""
    h = nx.Graph()
    h.add_nodes_from(g)
    for v in g:
        nb = set(g[v])
        for w in nb:
            for x in g[w]:
                if x != v and x not in nb:
                    h.add_edge(v, x)
    return h


def is_two_tree(g: nx.Graph, nodes: Iterable) -> bool:
    nodes = list(nodes)
    if not nodes:
        return False
    dist = {v: nx.single_source_shortest_path_length(g, v, cutoff=2) for v in nodes}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if dist[a].get(b, math.inf) < 2:
                return False
    h = nx.Graph()
    h.add_nodes_from(nodes)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if dist[a].get(b) == 2:
                h.add_edge(a, b)
    return nx.is_connected(h)


def enumerate_two_trees(g: nx.Graph, v: Hashable, size: int) -> list[frozenset]:
    """All 2-trees of exactly `size` vertices containing v."""
    if v not in g:
        raise KeyError(f"{v!r} is not a vertex")
    if size < 1:
        raise ValueError("size must be at least 1")
    d2 = distance_two_graph(g)
    found: set[frozenset] = set()
    seen: set[frozenset] = set()

    def grow(cur: frozenset, blocked: frozenset):
        if cur in seen:
            return
        seen.add(cur)
        if len(cur) == size:
            found.add(cur)
            return
        frontier = {x for t in cur for x in d2[t]} - cur - blocked
        for x in sorted(frontier, key=_sort_key):
            grow(cur | {x}, blocked | set(g[x]))

    grow(frozenset([v]), frozenset(g[v]))
    return sorted(found, key=lambda s: sorted(s, key=_sort_key))


def two_tree_count_bound(d: int, size: int) -> float:
    if d < 1 or size < 1:
        raise ValueError("need d >= 1 and size >= 1")
    return (math.e * d * d) ** (size - 1) / 2


def extract_two_tree(g: nx.Graph, h: Iterable, v: Hashable) -> frozenset:
    """Greedy 2-tree T with v in T inside h and |T| >= |h|/(d+1)."""
    h = set(h)
    if v not in h:
        raise ValueError("v must lie in h")
    if not nx.is_connected(g.subgraph(h)):
        raise ValueError("h is not connected")
    d = max((deg for _, deg in g.degree()), default=0)
    tree = [v]
    covered = ({v} | set(g[v])) & h
    d2 = distance_two_graph(g)
    while h - covered:
        cands = [w for w in h - covered if any(t in d2[w] for t in tree)]
        # a vertex of h outside the closed neighbourhood adjacent to a covered one is at distance 2
        if not cands:
            raise RuntimeError("greedy extraction stalled")
        w = min(cands, key=_sort_key)
        tree.append(w)
        covered |= ({w} | set(g[w])) & h
    out = frozenset(tree)
    assert is_two_tree(g, out) and len(out) * (d + 1) >= len(h)
    return out


@dataclass
class WitnessResult:
    passed: bool
    offending: list = field(default_factory=list)


def component_witness(g_c: nx.Graph, bad: Iterable, sym_diff: Iterable) -> WitnessResult:
    """Every connected component of g_c restricted to bad must meet sym_diff."""
    bad = set(bad)
    missing = bad - set(g_c)
    if missing:
        raise ValueError(f"bad vertices {sorted(missing, key=_sort_key)} are not in the graph")
    sd = set(sym_diff)
    off = [sorted(comp, key=_sort_key) for comp in nx.connected_components(g_c.subgraph(bad)) if not comp & sd]
    return WitnessResult(not off, off)


def disjoint_prob_bound(a_size: int, p: float, D: int, zeta: float) -> float:
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if math.e * p >= 1:
        raise ValueError("bound needs e*p < 1")
    if D < 0:
        raise ValueError("D must be non-negative")
    return p ** (2 * a_size / (2 + zeta)) * (1 - math.e * p) ** (-2 * (D + 1) * a_size)
