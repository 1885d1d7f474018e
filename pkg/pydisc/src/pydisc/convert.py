"""Latent-node substitution for LiNGAM-style outputs with explicit latents.

Each exogenous latent L with observed children W1, ..., Wk is removed and
replaced by bidirected edges between every pair of its children (pairwise
substitution of W1 <- L -> W2 by W1 <-> W2).
"""

from __future__ import annotations

import itertools


def convert_lingam_latents(
    nodes: list[str], directed: list[tuple[str, str]], latents: set[str]
) -> dict:
    """Remove explicit latent nodes, confounding their children pairwise.

    Returns ``{"nodes", "directed", "bidirected"}`` over the observed nodes.
    Latents must be exogenous (no parents) and must not point at each other.
    """
    nodes = list(nodes)
    unknown = set(latents) - set(nodes)
    if unknown:
        raise ValueError(f"latent nodes not in the graph: {sorted(unknown)}")
    for a, b in directed:
        if b in latents:
            raise ValueError(f"latent node {b!r} has a parent; must be exogenous")
    observed = [n for n in nodes if n not in latents]
    kept = sorted((a, b) for a, b in directed if a not in latents)
    bidirected: set[tuple[str, str]] = set()
    for lat in sorted(latents):
        children = sorted(b for a, b in directed if a == lat)
        for w1, w2 in itertools.combinations(children, 2):
            bidirected.add((w1, w2))
    return {
        "nodes": observed,
        "directed": [list(e) for e in kept],
        "bidirected": [list(e) for e in sorted(bidirected)],
    }
