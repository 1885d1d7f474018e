"""Deciding the X-Y edge from the two marginal graphs alone.

Everything here consumes a :class:`MarginalPair` (the graphs learned or
projected on the two leave-one-out variable sets) and produces either an
edge verdict with a rule trace, an adjustment set, or an abstention.
All decisions are sound by construction: a non-Undecidable verdict is a
claim about the joint graph, never a guess.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from .graph import Admg, GraphError, latent_project


class Verdict(str, Enum):
    ABSENT = "Absent"
    X_TO_Y = "DirectedXtoY"
    Y_TO_X = "DirectedYtoX"
    UNDECIDABLE = "Undecidable"


@dataclass(frozen=True)
class RuleHit:
    lemma: int
    condition: str
    witness: str | None = None

    def to_json(self) -> dict:
        out = {"lemma": self.lemma, "condition": self.condition}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass(frozen=True)
class EdgeDecision:
    verdict: Verdict
    trace: tuple[RuleHit, ...] = ()

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "trace": [h.to_json() for h in self.trace]}


class AbstentionError(Exception):
    """A predictor's graphical preconditions failed; no number is emitted."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class PreconditionError(ValueError):
    """An operation was invoked outside its contract."""


class AmbiguousReconstruction(Exception):
    """More than one joint DAG is consistent with the marginal pair."""


class InconsistentMarginals(Exception):
    """No joint DAG projects to both marginal graphs."""


@dataclass(frozen=True)
class MarginalPair:
    """The two marginal graphs G_X (over {X} u Z) and G_Y (over {Y} u Z)."""

    gx: Admg
    gy: Admg
    x: str
    y: str

    def __post_init__(self):
        if self.x not in self.gx.nodes:
            raise GraphError(f"{self.x!r} missing from gx")
        if self.y not in self.gy.nodes:
            raise GraphError(f"{self.y!r} missing from gy")
        if self.x in self.gy.nodes or self.y in self.gx.nodes:
            raise GraphError("marginal graphs must not contain the dropped variable")
        zx = set(self.gx.nodes) - {self.x}
        zy = set(self.gy.nodes) - {self.y}
        if zx != zy:
            raise GraphError("marginal graphs disagree on the shared variables Z")

    @property
    def z(self) -> frozenset[str]:
        return frozenset(set(self.gx.nodes) - {self.x})

    @classmethod
    def from_joint(cls, g: Admg, x: str, y: str) -> "MarginalPair":
        """Oracle marginals: project the joint graph."""
        return cls(latent_project(g, y), latent_project(g, x), x, y)


@dataclass(frozen=True)
class AdjustmentSet:
    members: frozenset[str]
    provenance: str  # UnionOfParents | Full | Random


# ---------------------------------------------------------------------------
# Lemma "excluding links in ADMGs"
# ---------------------------------------------------------------------------

def exclude_link_admg(mp: MarginalPair) -> EdgeDecision:
    """Absent iff one variable has a marginal child that is neither a child
    nor a sibling of the other variable in the other marginal. Never orients.
    """
    for g_a, a, g_b, b, tag in (
        (mp.gx, mp.x, mp.gy, mp.y, "x-side"),
        (mp.gy, mp.y, mp.gx, mp.x, "y-side"),
    ):
        for c in sorted(g_a.children(a)):
            if c not in g_b.children(b) and c not in g_b.siblings(b):
                hit = RuleHit(2, f"child-not-sibling ({tag})", c)
                return EdgeDecision(Verdict.ABSENT, (hit,))
    return EdgeDecision(Verdict.UNDECIDABLE)


# ---------------------------------------------------------------------------
# Lemma "excluding links from directed part"
# ---------------------------------------------------------------------------

def _directed_exclusions(g_a: Admg, a: str, g_b: Admg, b: str) -> list[RuleHit]:
    """Conditions excluding the edge a -> b, from directed parts only."""
    hits = []
    anc_a = g_a.ancestors(a)
    desc_b = g_b.descendants(b)
    both = anc_a & desc_b
    if both:
        hits.append(RuleHit(3, "causally-after", sorted(both)[0]))
    stray_parent = g_a.parents(a) - g_b.parents(b)
    if stray_parent:
        hits.append(RuleHit(3, "parent-not-shared", sorted(stray_parent)[0]))
    stray_child = g_b.children(b) - g_a.children(a)
    if stray_child:
        hits.append(RuleHit(3, "child-not-shared", sorted(stray_child)[0]))
    return hits


def exclude_link_directed(mp: MarginalPair, joint_is_dag: bool = True) -> EdgeDecision:
    """One-sided exclusions of X->Y / Y->X from the directed parts.

    Only when the joint graph is declared a DAG and both directions are
    excluded does the verdict become Absent; the surviving direction is
    never asserted (the rule trace records which side was ruled out).
    """
    excl_xy = [
        RuleHit(h.lemma, h.condition + " [excludes X->Y]", h.witness)
        for h in _directed_exclusions(mp.gx, mp.x, mp.gy, mp.y)
    ]
    excl_yx = [
        RuleHit(h.lemma, h.condition + " [excludes Y->X]", h.witness)
        for h in _directed_exclusions(mp.gy, mp.y, mp.gx, mp.x)
    ]
    trace = tuple(excl_xy + excl_yx)
    if joint_is_dag and excl_xy and excl_yx:
        return EdgeDecision(Verdict.ABSENT, trace)
    return EdgeDecision(Verdict.UNDECIDABLE, trace)


# ---------------------------------------------------------------------------
# Lemma "determining edge types in DAGs"
# ---------------------------------------------------------------------------

def classify_edge_dag(mp: MarginalPair) -> EdgeDecision:
    """Full edge-type classification when the joint graph is a DAG.

    The published wording tests "siblings of Y in G_X" and "children of X in
    G_Y", which cannot be meant literally (Y is not a node of G_X); the
    conditions implemented here follow the proof: bidirected edges in a
    marginal graph arise exactly from pairs of children of the dropped
    variable.
    """
    gx, gy, x, y = mp.gx, mp.gy, mp.x, mp.y
    trace: list[RuleHit] = []
    # X has >= 2 children in the joint graph iff G_Y contains a bidirected edge.
    x_two = bool(gy.bidirected)
    y_two = bool(gx.bidirected)
    xy: bool | None = None
    yx: bool | None = None

    if x_two:
        sib = sorted(gy.siblings(y))
        xy = bool(sib)
        trace.append(RuleHit(4, "1: X>=2 children, Y sibling test", sib[0] if sib else None))
        if xy:
            yx = False
    if y_two:
        sib = sorted(gx.siblings(x))
        if yx is None or sib:
            yx = bool(sib)
            trace.append(RuleHit(4, "1r: Y>=2 children, X sibling test", sib[0] if sib else None))
            if yx:
                if xy:
                    # learned marginals claiming both directions: refuse
                    return EdgeDecision(Verdict.UNDECIDABLE, tuple(trace) + (RuleHit(4, "conflict"),))
                xy = False
    if y_two and not x_two and xy is None:
        xy = len(gx.children(x)) >= 2
        trace.append(RuleHit(4, "2: Y>=2 children, X child count"))
    if x_two and not y_two and yx is None:
        yx = len(gy.children(y)) >= 2
        trace.append(RuleHit(4, "2r: X>=2 children, Y child count"))

    if x_two or y_two:
        if xy:
            return EdgeDecision(Verdict.X_TO_Y, tuple(trace))
        if yx:
            return EdgeDecision(Verdict.Y_TO_X, tuple(trace))
        if xy is False and yx is False:
            return EdgeDecision(Verdict.ABSENT, tuple(trace))
        return EdgeDecision(Verdict.UNDECIDABLE, tuple(trace))

    # Both X and Y have at most one child in the joint graph.
    chx, chy = gx.children(x), gy.children(y)
    if chx != chy:
        return EdgeDecision(Verdict.ABSENT, (RuleHit(4, "3a: marginal child sets differ"),))
    pax, pay = gx.parents(x), gy.parents(y)
    if not pax <= pay and not pay <= pax:
        return EdgeDecision(Verdict.ABSENT, (RuleHit(4, "3b: parent sets not nested"),))
    if len(chx) == 1:
        (c,) = chx
        pacx, pacy = gx.parents(c), gy.parents(c)
        rel_xy = pax <= pay <= (pax | pacx)        # X -> Y -> C
        rel_yx = pay <= pax <= (pay | pacy)        # Y -> X -> C
        rel_none = pax <= pacy and pay <= pacx     # X -> C <- Y
        matches = [rel_xy, rel_yx, rel_none]
        if sum(matches) == 1:
            if rel_none:
                return EdgeDecision(Verdict.ABSENT, (RuleHit(4, "3c: collider parent pattern", c),))
            if rel_xy:
                return EdgeDecision(Verdict.X_TO_Y, (RuleHit(4, "3d: chain parent pattern", c),))
            return EdgeDecision(Verdict.Y_TO_X, (RuleHit(4, "3d(r): chain parent pattern", c),))
    # The parent-set relations are necessary but not sufficient, so when
    # several (or none) of them hold the status may still be unique;
    # enumerate the joints consistent with each status to settle it.
    return _classify_by_enumeration(mp)


def _classify_by_enumeration(mp: MarginalPair) -> EdgeDecision:
    """Exact fallback: a status is possible iff some joint DAG with that
    X-Y status projects onto both marginals; decide iff exactly one is."""
    possible = []
    for verdict in (Verdict.ABSENT, Verdict.X_TO_Y, Verdict.Y_TO_X):
        try:
            fits = bool(_consistent_joints(mp, verdict, cap=1))
        except AmbiguousReconstruction:
            return EdgeDecision(
                Verdict.UNDECIDABLE, (RuleHit(4, "3: too many candidate joints"),)
            )
        if fits:
            possible.append(verdict)
    if len(possible) == 1:
        return EdgeDecision(possible[0], (RuleHit(4, "3e: unique consistent status"),))
    return EdgeDecision(Verdict.UNDECIDABLE, (RuleHit(4, "3: multiple structures fit"),))


# ---------------------------------------------------------------------------
# Alternative ADMG convention (no confounded causal links)
# ---------------------------------------------------------------------------

def to_no_confounded_links(g: Admg) -> Admg:
    """Convert to the convention where a bidirected edge replaces a
    confounded causal link."""
    directed = {(a, b) for a, b in g.directed if not g.has_bidirected(a, b)}
    return Admg(g.nodes, frozenset(directed), g.bidirected)


def classify_edge_admg_no_confounded_links(
    mp: MarginalPair, joint_is_dag: bool = False
) -> EdgeDecision:
    """Edge decision for marginals in the no-confounded-links convention.

    Runs the DAG classifier or the ADMG exclusion rule, then refrains from
    any Absent claim as soon as X or Y has siblings: under this convention
    a sibling may hide a parent-child relation.
    """
    base = classify_edge_dag(mp) if joint_is_dag else exclude_link_admg(mp)
    if mp.gx.siblings(mp.x) or mp.gy.siblings(mp.y):
        if base.verdict is Verdict.ABSENT:
            hit = RuleHit(2, "sibling-abstention: X or Y has siblings")
            return EdgeDecision(Verdict.UNDECIDABLE, base.trace + (hit,))
    return base


# ---------------------------------------------------------------------------
# Adjustment set
# ---------------------------------------------------------------------------

def union_of_parents(mp: MarginalPair, decision: EdgeDecision) -> AdjustmentSet:
    """pa(X) u pa(Y) read off the marginals; valid separator when the pair is
    unlinked and every parent is unconfounded."""
    if decision.verdict is not Verdict.ABSENT:
        raise PreconditionError("adjustment by union of parents requires an Absent verdict")
    for g, n in ((mp.gx, mp.x), (mp.gy, mp.y)):
        for p in g.parents(n):
            if g.has_bidirected(p, n):
                raise AbstentionError("ConfoundedParent", f"{p} is a confounded parent of {n}")
    members = frozenset(mp.gx.parents(mp.x) | mp.gy.parents(mp.y))
    return AdjustmentSet(members, "UnionOfParents")


# ---------------------------------------------------------------------------
# Joint reconstruction (directed part, joint assumed DAG)
# ---------------------------------------------------------------------------

_MAX_OPTIONAL = 16


def _same_graph(g1: Admg, g2: Admg) -> bool:
    """Equality up to node ordering."""
    return (
        set(g1.nodes) == set(g2.nodes)
        and g1.directed == g2.directed
        and g1.bidirected == g2.bidirected
    )


def _consistent_joints(mp: MarginalPair, verdict: Verdict, cap: int) -> list[Admg]:
    """Joint DAGs with the given X-Y status that project onto both marginals.

    Edges are split into forced (present in a marginal with no alternative
    explanation through the dropped node) and optional; every assignment of
    the optional edges is checked by projecting back onto the marginals.
    Stops after `cap` survivors.
    """
    gx, gy, x, y = mp.gx, mp.gy, mp.x, mp.y
    z = sorted(mp.z)
    forced: set[tuple[str, str]] = set()
    optional: set[tuple[str, str]] = set()

    if verdict is Verdict.X_TO_Y:
        forced.add((x, y))
    elif verdict is Verdict.Y_TO_X:
        forced.add((y, x))

    # adjacencies of X as seen in G_X
    for p in gx.parents(x):
        if verdict is Verdict.Y_TO_X and p in gy.parents(y):
            optional.add((p, x))  # may be explained by p -> y -> x
        else:
            forced.add((p, x))
    for c in gx.children(x):
        if verdict is Verdict.X_TO_Y and c in gy.children(y):
            optional.add((x, c))  # may be explained by x -> y -> c
        else:
            forced.add((x, c))
    for p in gy.parents(y):
        if verdict is Verdict.X_TO_Y and p in gx.parents(x):
            optional.add((p, y))
        else:
            forced.add((p, y))
    for c in gy.children(y):
        if verdict is Verdict.Y_TO_X and c in gx.children(x):
            optional.add((y, c))
        else:
            forced.add((y, c))

    # Z-internal edges must appear in both marginals; they are optional only
    # when explainable through the dropped node on both sides.
    pa_x_cand = gx.parents(x)
    ch_x_cand = gx.children(x)
    pa_y_cand = gy.parents(y)
    ch_y_cand = gy.children(y)
    for a in z:
        for b in z:
            if a == b:
                continue
            if (a, b) in gx.directed and (a, b) in gy.directed:
                via_y = a in pa_y_cand and b in ch_y_cand
                via_x = a in pa_x_cand and b in ch_x_cand
                if via_x and via_y:
                    optional.add((a, b))
                else:
                    forced.add((a, b))

    optional -= forced
    if len(optional) > _MAX_OPTIONAL:
        raise AmbiguousReconstruction(
            f"{len(optional)} undetermined edges; too many candidate joints"
        )

    nodes = tuple(sorted(set(gx.nodes) | {y}))
    survivors = []
    opt = sorted(optional)
    for keep in itertools.product((False, True), repeat=len(opt)):
        edges = set(forced)
        edges.update(e for e, k in zip(opt, keep) if k)
        try:
            cand = Admg.create(nodes, edges)
        except GraphError:
            continue
        if _same_graph(latent_project(cand, y), gx) and _same_graph(
            latent_project(cand, x), gy
        ):
            survivors.append(cand)
            if len(survivors) >= cap:
                return survivors
    return survivors


def reconstruct_joint_directed(mp: MarginalPair, decision: EdgeDecision) -> Admg:
    """Rebuild the joint DAG from the marginal pair and a decided X-Y status.

    Raises Ambiguous/Inconsistent when the survivor count is not one.
    """
    if decision.verdict is Verdict.UNDECIDABLE:
        raise PreconditionError("reconstruction requires a decided X-Y status")
    survivors = _consistent_joints(mp, decision.verdict, cap=2)
    if len(survivors) > 1:
        raise AmbiguousReconstruction("multiple joint DAGs fit the marginals")
    if not survivors:
        raise InconsistentMarginals("no joint DAG projects onto both marginals")
    return survivors[0]
