"""Acyclic directed mixed graphs: representation, marginalization, separation,
random generation and distances.

Nodes are plain strings, unique within a graph. A DAG is simply an ``Admg``
with an empty bidirected part. A pair of nodes may carry a directed and a
bidirected edge at the same time (a "confounded causal link").
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Invalid graph input (unknown node, malformed edge, ...)."""


class CycleError(GraphError):
    """The directed part of the graph contains a cycle."""


def _norm_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Admg:
    """Immutable acyclic directed mixed graph.

    ``directed`` holds ordered (parent, child) pairs, ``bidirected`` holds
    unordered pairs stored in sorted order.
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]] = frozenset()
    bidirected: frozenset[tuple[str, str]] = frozenset()
    _parents: dict = field(default=None, repr=False, compare=False)
    _children: dict = field(default=None, repr=False, compare=False)
    _siblings: dict = field(default=None, repr=False, compare=False)
    _order: tuple = field(default=None, repr=False, compare=False)

    @classmethod
    def create(cls, nodes, directed=(), bidirected=()) -> "Admg":
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        if any(not n for n in nodes):
            raise GraphError("empty node name")
        node_set = set(nodes)
        dir_edges = set()
        for a, b in directed:
            if a not in node_set or b not in node_set:
                raise GraphError(f"directed edge ({a}, {b}) has unknown endpoint")
            if a == b:
                raise GraphError(f"self-loop at {a}")
            dir_edges.add((a, b))
        bi_edges = set()
        for a, b in bidirected:
            if a not in node_set or b not in node_set:
                raise GraphError(f"bidirected edge ({a}, {b}) has unknown endpoint")
            if a == b:
                raise GraphError(f"self-loop at {a}")
            bi_edges.add(_norm_pair(a, b))
        return cls(nodes, frozenset(dir_edges), frozenset(bi_edges))

    def __post_init__(self):
        parents: dict[str, set[str]] = {n: set() for n in self.nodes}
        children: dict[str, set[str]] = {n: set() for n in self.nodes}
        siblings: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.directed:
            parents[b].add(a)
            children[a].add(b)
        for a, b in self.bidirected:
            siblings[a].add(b)
            siblings[b].add(a)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_siblings", siblings)
        object.__setattr__(self, "_order", _toposort(self.nodes, parents))

    # -- adjacency ---------------------------------------------------------
    def parents(self, n: str) -> frozenset[str]:
        self._check(n)
        return frozenset(self._parents[n])

    def children(self, n: str) -> frozenset[str]:
        self._check(n)
        return frozenset(self._children[n])

    def siblings(self, n: str) -> frozenset[str]:
        self._check(n)
        return frozenset(self._siblings[n])

    def has_directed(self, a: str, b: str) -> bool:
        return (a, b) in self.directed

    def has_bidirected(self, a: str, b: str) -> bool:
        return _norm_pair(a, b) in self.bidirected

    def adjacent(self, a: str, b: str) -> bool:
        return (
            (a, b) in self.directed
            or (b, a) in self.directed
            or _norm_pair(a, b) in self.bidirected
        )

    @property
    def is_dag(self) -> bool:
        return not self.bidirected

    def _check(self, n: str):
        if n not in self._parents:
            raise GraphError(f"unknown node {n!r}")

    # -- closures ----------------------------------------------------------
    def ancestors(self, n: str) -> frozenset[str]:
        """Strict ancestors of ``n`` over the directed part."""
        return self._closure(n, self._parents)

    def descendants(self, n: str) -> frozenset[str]:
        """Strict descendants of ``n`` over the directed part."""
        return self._closure(n, self._children)

    def _closure(self, n, step) -> frozenset[str]:
        self._check(n)
        seen, stack = set(), [n]
        while stack:
            for m in step[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        seen.discard(n)
        return frozenset(seen)

    def topological_order(self) -> tuple[str, ...]:
        return self._order


def _toposort(nodes, parents) -> tuple[str, ...]:
    pending = {n: len(parents[n]) for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for n in nodes:
        for p in parents[n]:
            children[p].append(n)
    ready = [n for n in nodes if pending[n] == 0]
    order = []
    while ready:
        n = ready.pop()
        order.append(n)
        for c in children[n]:
            pending[c] -= 1
            if pending[c] == 0:
                ready.append(c)
    if len(order) != len(nodes):
        raise CycleError("directed part of the graph is cyclic")
    return tuple(order)


@dataclass(frozen=True)
class UndirectedGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    @classmethod
    def create(cls, nodes, edges=()) -> "UndirectedGraph":
        nodes = tuple(nodes)
        node_set = set(nodes)
        norm = set()
        for a, b in edges:
            if a == b:
                raise GraphError(f"self-loop at {a}")
            if a not in node_set or b not in node_set:
                raise GraphError(f"edge ({a}, {b}) has unknown endpoint")
            norm.add(_norm_pair(a, b))
        return cls(nodes, frozenset(norm))

    def has_edge(self, a: str, b: str) -> bool:
        return _norm_pair(a, b) in self.edges


@dataclass(frozen=True)
class GraphGenConfig:
    node_count: int
    p: float
    q: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphError("node_count must be positive")
        if not (0.0 <= self.p <= 1.0) or not (0.0 <= self.q <= 1.0):
            raise GraphError("edge probabilities must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Marginalization (latent projection)
# ---------------------------------------------------------------------------

def latent_project(g: Admg, drop: str) -> Admg:
    """Marginal ADMG on ``g.nodes`` minus ``drop``.

    Directed paths through the dropped node turn into directed edges;
    confounding patterns (common child of two retained nodes via
    ``a <- drop -> b``, ``a <- drop <-> b`` or ``a <-> drop -> b``) turn
    into bidirected edges.
    """
    g._check(drop)
    keep = tuple(n for n in g.nodes if n != drop)
    directed = {(a, b) for a, b in g.directed if a != drop and b != drop}
    pa_d = g._parents[drop]
    ch_d = g._children[drop]
    sib_d = g._siblings[drop]
    for a in pa_d:
        for b in ch_d:
            if a != b:
                directed.add((a, b))
    bidirected = {e for e in g.bidirected if drop not in e}
    for a, b in itertools.combinations(sorted(ch_d), 2):
        bidirected.add(_norm_pair(a, b))
    for a in ch_d:
        for b in sib_d:
            if a != b:
                bidirected.add(_norm_pair(a, b))
    return Admg(keep, frozenset(directed), frozenset(bidirected))


def project_out(g: Admg, drops) -> Admg:
    """Iterated single-node projection; order-independent."""
    for d in drops:
        g = latent_project(g, d)
    return g


def moral_graph(g: Admg) -> UndirectedGraph:
    """Undirected skeleton plus edges marrying co-parents. DAG input only."""
    if not g.is_dag:
        raise GraphError("moral graph is defined for DAGs only")
    edges = {_norm_pair(a, b) for a, b in g.directed}
    for n in g.nodes:
        for a, b in itertools.combinations(sorted(g._parents[n]), 2):
            edges.add(_norm_pair(a, b))
    return UndirectedGraph(g.nodes, frozenset(edges))


# ---------------------------------------------------------------------------
# Separation
# ---------------------------------------------------------------------------

def m_separated(g: Admg, a: str, b: str, s) -> bool:
    """m-separation; bidirected edges count as arrowheads at both ends."""
    s = frozenset(s)
    g._check(a)
    g._check(b)
    for n in s:
        g._check(n)
    if a in s or b in s or a == b:
        raise GraphError("endpoints must be distinct and disjoint from the conditioning set")

    # nodes whose descendants (or themselves) intersect S: open colliders
    opens_collider = set(s)
    frontier = list(s)
    while frontier:
        n = frontier.pop()
        for p in g._parents[n]:
            if p not in opens_collider:
                opens_collider.add(p)
                frontier.append(p)

    # state: (node, arrived_with_arrowhead_at_node)
    start = [(n, True) for n in g._children[a]]
    start += [(n, False) for n in g._parents[a]]
    start += [(n, True) for n in g._siblings[a]]
    seen = set()
    stack = [st for st in start if st not in seen and not seen.add(st)]
    while stack:
        node, head_in = stack.pop()
        if node == b:
            return False
        # moves out of `node`; the pair (head_in, head_out) decides collider
        for nxt, head_at_node, head_at_next in _moves(g, node):
            if head_in and head_at_node:
                passable = node in opens_collider
            else:
                passable = node not in s
            if passable:
                st = (nxt, head_at_next)
                if st not in seen:
                    seen.add(st)
                    stack.append(st)
    return True


def _moves(g: Admg, node: str):
    for c in g._children[node]:
        yield c, False, True  # node -> c : tail at node, head at c
    for p in g._parents[node]:
        yield p, True, False  # node <- p traversed towards p
    for sb in g._siblings[node]:
        yield sb, True, True


def d_separated(g: Admg, a: str, b: str, s) -> bool:
    """d-separation in a DAG; same walk rules with no bidirected edges."""
    if not g.is_dag:
        raise GraphError("d-separation expects a DAG; use m_separated for ADMGs")
    return m_separated(g, a, b, s)


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------

def _default_nodes(d: int) -> tuple[str, ...]:
    return tuple(f"V{i}" for i in range(d))


def generate_er_dag(cfg: GraphGenConfig, nodes=None) -> Admg:
    """Erdos-Renyi DAG: random total order, each forward edge kept w.p. p."""
    rng = np.random.default_rng(cfg.seed)
    nodes = tuple(nodes) if nodes is not None else _default_nodes(cfg.node_count)
    if len(nodes) != cfg.node_count:
        raise GraphError("node list length does not match node_count")
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    directed = set()
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if rng.random() < cfg.p:
                directed.add((order[i], order[j]))
    return Admg.create(nodes, directed)


def generate_er_admg(cfg: GraphGenConfig, nodes=None) -> Admg:
    """ER DAG plus independent Bernoulli(q) bidirected edges."""
    rng = np.random.default_rng(cfg.seed)
    nodes = tuple(nodes) if nodes is not None else _default_nodes(cfg.node_count)
    if len(nodes) != cfg.node_count:
        raise GraphError("node list length does not match node_count")
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    directed = set()
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if rng.random() < cfg.p:
                directed.add((order[i], order[j]))
    bidirected = set()
    for a, b in itertools.combinations(nodes, 2):
        if rng.random() < cfg.q:
            bidirected.add(_norm_pair(a, b))
    return Admg.create(nodes, directed, bidirected)


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------

def shd(g1: Admg, g2: Admg) -> int:
    """Structural Hamming distance on per-pair edge records.

    Each unordered pair contributes one unit per differing record component:
    (directed status with orientation, bidirected status). A pure reversal
    costs 1; a directed-vs-bidirected swap costs 2.
    """
    if set(g1.nodes) != set(g2.nodes):
        raise GraphError("SHD requires identical node sets")
    total = 0
    for a, b in itertools.combinations(sorted(g1.nodes), 2):
        total += _dir_status(g1, a, b) != _dir_status(g2, a, b)
        total += g1.has_bidirected(a, b) != g2.has_bidirected(a, b)
    return total


def _dir_status(g: Admg, a: str, b: str) -> int:
    if (a, b) in g.directed:
        return 1
    if (b, a) in g.directed:
        return 2
    return 0


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------

_GRAPH_FIELDS = {"nodes", "directed", "bidirected"}
# Producers (e.g. external discovery adapters) may annotate the graph with the
# bidirected-edge convention they use and free-form run metadata.
_OPTIONAL_FIELDS = {"convention", "metadata"}
CONVENTIONS = ("standard", "no-confounded-links")


def graph_to_json(g: Admg) -> dict:
    return {
        "nodes": list(g.nodes),
        "directed": sorted([a, b] for a, b in g.directed),
        "bidirected": sorted([a, b] for a, b in g.bidirected),
    }


def graph_from_json(obj: dict) -> Admg:
    if not isinstance(obj, dict):
        raise GraphError("graph JSON must be an object")
    unknown = set(obj) - _GRAPH_FIELDS - _OPTIONAL_FIELDS
    if unknown:
        raise GraphError(f"unknown graph JSON fields: {sorted(unknown)}")
    if "convention" in obj and obj["convention"] not in CONVENTIONS:
        raise GraphError(f"unknown graph convention: {obj['convention']!r}")
    missing = _GRAPH_FIELDS - set(obj)
    if missing:
        raise GraphError(f"missing graph JSON fields: {sorted(missing)}")
    return Admg.create(obj["nodes"], obj["directed"], obj["bidirected"])


def write_graph(g: Admg, path):
    with open(path, "w") as fh:
        json.dump(graph_to_json(g), fh, indent=2)
        fh.write("\n")


def read_graph(path) -> Admg:
    with open(path) as fh:
        return graph_from_json(json.load(fh))
