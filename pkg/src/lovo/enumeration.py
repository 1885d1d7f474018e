"""Exhaustive enumeration of small DAGs and ADMGs.

Used by the test and acceptance suites as a brute-force oracle; desk-scale
only (up to five nodes for DAGs, four for ADMGs).
"""

from __future__ import annotations

import itertools

from .graph import Admg


def all_dags(nodes) -> list[Admg]:
    """Every labeled DAG on ``nodes``."""
    nodes = tuple(nodes)
    pairs = list(itertools.combinations(nodes, 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        directed = []
        for (a, b), c in zip(pairs, choice):
            if c == 1:
                directed.append((a, b))
            elif c == 2:
                directed.append((b, a))
        if _acyclic(nodes, directed):
            out.append(Admg.create(nodes, directed))
    return out


def all_admgs(nodes) -> list[Admg]:
    """Every labeled ADMG on ``nodes`` (confounded causal links allowed)."""
    nodes = tuple(nodes)
    pairs = list(itertools.combinations(nodes, 2))
    out = []
    for dag in all_dags(nodes):
        for k in range(len(pairs) + 1):
            for bi in itertools.combinations(pairs, k):
                out.append(Admg.create(dag.nodes, dag.directed, bi))
    return out


def _acyclic(nodes, directed) -> bool:
    children: dict[str, list[str]] = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in directed:
        children[a].append(b)
        indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen == len(nodes)
