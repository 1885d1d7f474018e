"""Edge-status decisions from the two marginal graphs."""

import itertools

import numpy as np
import pytest

from lovo.edge_rules import (
    AbstentionError,
    AmbiguousReconstruction,
    EdgeDecision,
    InconsistentMarginals,
    MarginalPair,
    PreconditionError,
    Verdict,
    classify_edge_admg_no_confounded_links,
    classify_edge_dag,
    exclude_link_admg,
    exclude_link_directed,
    reconstruct_joint_directed,
    to_no_confounded_links,
    union_of_parents,
)
from lovo.enumeration import all_admgs, all_dags
from lovo.graph import (
    Admg,
    GraphError,
    GraphGenConfig,
    generate_er_dag,
    latent_project,
    m_separated,
)


def g(nodes, directed=(), bidirected=()):
    return Admg.create(tuple(nodes), directed, bidirected)


def pair_from_joint(joint, x, y):
    return MarginalPair.from_joint(joint, x, y)


def status_of(joint, x, y):
    if joint.has_directed(x, y):
        return Verdict.X_TO_Y
    if joint.has_directed(y, x):
        return Verdict.Y_TO_X
    if joint.adjacent(x, y):
        return None  # bidirected link: no directed verdict is sound
    return Verdict.ABSENT


# ---------------------------------------------------------------------------
# MarginalPair invariants
# ---------------------------------------------------------------------------

def test_marginal_pair_validation():
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Z", "Y")])
    mp = MarginalPair(gx, gy, "X", "Y")
    assert mp.z == {"Z"}
    with pytest.raises(GraphError):
        MarginalPair(gx, gy, "Z", "Y")  # X missing role
    with pytest.raises(GraphError):
        MarginalPair(gx, g(("Y", "W"), []), "X", "Y")  # Z mismatch
    with pytest.raises(GraphError):
        MarginalPair(gx, g(("Y", "Z", "X")), "X", "Y")  # dropped node present


# ---------------------------------------------------------------------------
# Link exclusion in ADMGs
# ---------------------------------------------------------------------------

def test_exclude_admg_child_not_sibling():
    gx = g(("X", "Z1", "Z2"), [("X", "Z1"), ("X", "Z2")])
    gy = g(("Y", "Z1", "Z2"), [("Y", "Z2")])
    decision = exclude_link_admg(MarginalPair(gx, gy, "X", "Y"))
    assert decision.verdict is Verdict.ABSENT
    assert decision.trace[0].witness == "Z1"


def test_exclude_admg_shared_child_undecidable():
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Y", "Z")])
    assert exclude_link_admg(MarginalPair(gx, gy, "X", "Y")).verdict is Verdict.UNDECIDABLE


def test_exclude_admg_sound_on_3_node_admgs():
    for joint in all_admgs(("A", "B", "C")):
        for x, y in itertools.combinations(joint.nodes, 2):
            if exclude_link_admg(pair_from_joint(joint, x, y)).verdict is Verdict.ABSENT:
                assert not joint.adjacent(x, y)


def test_exclude_admg_sound_on_sampled_4_node_admgs():
    admgs = all_admgs(("A", "B", "C", "D"))
    rng = np.random.default_rng(2)
    for i in rng.choice(len(admgs), size=1500, replace=False):
        joint = admgs[i]
        for x, y in itertools.combinations(joint.nodes, 2):
            if exclude_link_admg(pair_from_joint(joint, x, y)).verdict is Verdict.ABSENT:
                assert not joint.adjacent(x, y)


# ---------------------------------------------------------------------------
# Link exclusion from directed parts
# ---------------------------------------------------------------------------

def test_exclude_directed_one_sided_only():
    # X -> Z -> Y: the Y->X direction is excluded but nothing is asserted.
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Z", "Y")])
    decision = exclude_link_directed(MarginalPair(gx, gy, "X", "Y"))
    assert decision.verdict is Verdict.UNDECIDABLE
    assert any("Y->X" in hit.condition for hit in decision.trace)
    assert not any("X->Y" in hit.condition for hit in decision.trace)


def test_exclude_directed_parent_condition():
    gx = g(("X", "P"), [("P", "X")])
    gy = g(("Y", "P"))
    decision = exclude_link_directed(MarginalPair(gx, gy, "X", "Y"))
    assert any("X->Y" in hit.condition for hit in decision.trace)


def test_exclude_directed_absent_needs_both_sides_and_dag_claim():
    # Both directions excluded via stray parents.
    gx = g(("X", "P", "Q"), [("P", "X")])
    gy = g(("Y", "P", "Q"), [("Q", "Y")])
    mp = MarginalPair(gx, gy, "X", "Y")
    assert exclude_link_directed(mp, joint_is_dag=True).verdict is Verdict.ABSENT
    assert exclude_link_directed(mp, joint_is_dag=False).verdict is Verdict.UNDECIDABLE


def test_exclude_directed_sound_on_4_node_dags():
    for joint in all_dags(("A", "B", "C", "D")):
        for x, y in itertools.permutations(joint.nodes, 2):
            decision = exclude_link_directed(pair_from_joint(joint, x, y))
            if decision.verdict is Verdict.ABSENT:
                assert not joint.adjacent(x, y)
            # one-sided exclusions must also be sound
            for hit in decision.trace:
                if "X->Y" in hit.condition:
                    assert not joint.has_directed(x, y)
                if "Y->X" in hit.condition:
                    assert not joint.has_directed(y, x)


# ---------------------------------------------------------------------------
# Edge-type classification in DAGs
# ---------------------------------------------------------------------------

def test_classify_chain_pair_absent():
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Z", "Y")])
    decision = classify_edge_dag(MarginalPair(gx, gy, "X", "Y"))
    assert decision.verdict is Verdict.ABSENT
    assert decision.trace[0].condition.startswith("3a")


def test_classify_two_children_directed():
    joint = g(("X", "Y", "Z1", "Z2"), [("X", "Z1"), ("X", "Z2"), ("X", "Y")])
    mp = pair_from_joint(joint, "X", "Y")
    assert mp.gy.bidirected  # X has two or more children
    assert mp.gy.siblings("Y")
    assert classify_edge_dag(mp).verdict is Verdict.X_TO_Y
    # reversed roles give the mirror verdict
    mirror = pair_from_joint(joint, "Y", "X")
    assert classify_edge_dag(mirror).verdict is Verdict.Y_TO_X


def test_classify_second_condition_child_count():
    # Y has two children, X has fewer; X -> Y iff X has two children in gx.
    joint = g(("X", "Y", "C1", "C2"), [("X", "Y"), ("Y", "C1"), ("Y", "C2")])
    assert classify_edge_dag(pair_from_joint(joint, "X", "Y")).verdict is Verdict.X_TO_Y
    unlinked = g(("X", "Y", "C1", "C2"), [("Y", "C1"), ("Y", "C2")])
    assert classify_edge_dag(pair_from_joint(unlinked, "X", "Y")).verdict is Verdict.ABSENT


def test_classify_single_shared_child_patterns():
    # A bare chain X -> Y -> C projects to the same marginals as the
    # collider X -> C <- Y, so neither pattern is decidable on its own.
    chain = g(("X", "Y", "C"), [("X", "Y"), ("Y", "C")])
    collider = g(("X", "Y", "C"), [("X", "C"), ("Y", "C")])
    mp_chain = pair_from_joint(chain, "X", "Y")
    mp_collider = pair_from_joint(collider, "X", "Y")
    assert _signature(mp_chain) == _signature(mp_collider)
    assert classify_edge_dag(mp_chain).verdict is Verdict.UNDECIDABLE
    # An asymmetric parent breaks the tie: here only the cause-side parent
    # relation is compatible, so the edge orientation is recovered.
    decided = g(
        ("P", "Q", "X", "Y", "C"),
        [("X", "Y"), ("Y", "C"), ("P", "X"), ("Q", "Y")],
    )
    assert classify_edge_dag(pair_from_joint(decided, "X", "Y")).verdict is Verdict.X_TO_Y


def test_classify_empty_marginals_undecidable():
    # Empty marginals are consistent both with no edge and with a lone X-Y
    # edge, so nothing may be decided.
    gx = g(("X", "Z"))
    gy = g(("Y", "Z"))
    assert classify_edge_dag(MarginalPair(gx, gy, "X", "Y")).verdict is Verdict.UNDECIDABLE


def _signature(mp):
    def canon(gr):
        return (tuple(sorted(gr.nodes)), tuple(sorted(gr.directed)), tuple(sorted(gr.bidirected)))

    return canon(mp.gx), canon(mp.gy)


def test_classify_sound_and_exhaustive_on_3_node_dags():
    nodes = ("A", "B", "C")
    dags = all_dags(nodes)
    for x, y in itertools.permutations(nodes, 2):
        statuses = {}
        for joint in dags:
            sig = _signature(pair_from_joint(joint, x, y))
            statuses.setdefault(sig, set()).add(status_of(joint, x, y))
        for joint in dags:
            mp = pair_from_joint(joint, x, y)
            verdict = classify_edge_dag(mp).verdict
            consistent = statuses[_signature(mp)]
            if verdict is Verdict.UNDECIDABLE:
                assert len(consistent) > 1
            else:
                assert consistent == {verdict}


def test_classify_decides_superset_of_directed_exclusion():
    for joint in all_dags(("A", "B", "C", "D"))[::7]:
        for x, y in itertools.combinations(joint.nodes, 2):
            mp = pair_from_joint(joint, x, y)
            if exclude_link_directed(mp).verdict is Verdict.ABSENT:
                assert classify_edge_dag(mp).verdict is Verdict.ABSENT


# ---------------------------------------------------------------------------
# Alternative convention without confounded causal links
# ---------------------------------------------------------------------------

def test_no_confounded_links_sibling_blocks_absence():
    gx = g(("X", "Z1", "Z2"), [("X", "Z1"), ("X", "Z2")], [("X", "Z1")])
    gy = g(("Y", "Z1", "Z2"), [("Y", "Z2")])
    mp = MarginalPair(gx, gy, "X", "Y")
    assert exclude_link_admg(mp).verdict is Verdict.ABSENT
    assert classify_edge_admg_no_confounded_links(mp).verdict is Verdict.UNDECIDABLE


def test_no_confounded_links_reduces_when_sibling_free():
    gx = g(("X", "Z1", "Z2"), [("X", "Z1"), ("X", "Z2")])
    gy = g(("Y", "Z1", "Z2"), [("Y", "Z2")])
    mp = MarginalPair(gx, gy, "X", "Y")
    assert (
        classify_edge_admg_no_confounded_links(mp).verdict
        == exclude_link_admg(mp).verdict
    )


def test_convention_translation_never_adds_absence():
    admgs = all_admgs(("A", "B", "C"))
    for joint in admgs:
        for x, y in itertools.combinations(joint.nodes, 2):
            mp = pair_from_joint(joint, x, y)
            converted = MarginalPair(
                to_no_confounded_links(mp.gx), to_no_confounded_links(mp.gy), x, y
            )
            before = exclude_link_admg(mp).verdict
            after = classify_edge_admg_no_confounded_links(converted).verdict
            if after is Verdict.ABSENT:
                assert before is Verdict.ABSENT


def test_to_no_confounded_links():
    gr = g("AB", [("A", "B")], [("A", "B")])
    out = to_no_confounded_links(gr)
    assert not out.directed and out.bidirected == {("A", "B")}


# ---------------------------------------------------------------------------
# Adjustment set
# ---------------------------------------------------------------------------

def test_union_of_parents_read_off():
    gx = g(("X", "Z1", "Z2"), [("Z1", "X")])
    gy = g(("Y", "Z1", "Z2"), [("Z2", "Y")])
    mp = MarginalPair(gx, gy, "X", "Y")
    decision = classify_edge_dag(mp)
    zs = union_of_parents(mp, decision)
    assert zs.members == {"Z1", "Z2"} and zs.provenance == "UnionOfParents"


def test_union_of_parents_confounded_abstains():
    gx = g(("X", "Z1", "Z2"), [("Z1", "X"), ("X", "Z2")], [("Z1", "X")])
    gy = g(("Y", "Z1", "Z2"), [("Z1", "Y")])
    mp = MarginalPair(gx, gy, "X", "Y")
    decision = exclude_link_admg(mp)
    assert decision.verdict is Verdict.ABSENT
    with pytest.raises(AbstentionError) as err:
        union_of_parents(mp, decision)
    assert err.value.reason == "ConfoundedParent"


def test_union_of_parents_requires_absent():
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Y", "Z")])
    mp = MarginalPair(gx, gy, "X", "Y")
    decision = exclude_link_admg(mp)
    assert decision.verdict is Verdict.UNDECIDABLE
    with pytest.raises(PreconditionError):
        union_of_parents(mp, decision)


def test_union_of_parents_separates_on_4_node_dags():
    for joint in all_dags(("A", "B", "C", "D")):
        for x, y in itertools.combinations(joint.nodes, 2):
            mp = pair_from_joint(joint, x, y)
            decision = classify_edge_dag(mp)
            if decision.verdict is not Verdict.ABSENT:
                continue
            zs = union_of_parents(mp, decision)
            assert x not in zs.members and y not in zs.members
            assert m_separated(joint, x, y, zs.members)


def test_union_of_parents_separates_on_sampled_6_node_dags():
    for seed in range(40):
        joint = generate_er_dag(GraphGenConfig(6, 0.35, 0.0, seed))
        for x, y in itertools.combinations(joint.nodes, 2):
            mp = pair_from_joint(joint, x, y)
            decision = classify_edge_dag(mp)
            if decision.verdict is Verdict.ABSENT:
                assert m_separated(joint, x, y, union_of_parents(mp, decision).members)


# ---------------------------------------------------------------------------
# Joint reconstruction
# ---------------------------------------------------------------------------

def test_reconstruct_chain():
    gx = g(("X", "Z"), [("X", "Z")])
    gy = g(("Y", "Z"), [("Z", "Y")])
    mp = MarginalPair(gx, gy, "X", "Y")
    joint = reconstruct_joint_directed(mp, classify_edge_dag(mp))
    assert joint.directed == {("X", "Z"), ("Z", "Y")}


def test_reconstruct_round_trip_6_node_dag():
    joint = Admg.create(
        ("W", "X", "Y", "Z1", "Z2", "Z3"),
        [("W", "X"), ("X", "Y"), ("X", "Z1"), ("Y", "Z2"), ("Z1", "Z2"), ("Z2", "Z3")],
    )
    mp = pair_from_joint(joint, "X", "Y")
    decision = classify_edge_dag(mp)
    assert decision.verdict is Verdict.X_TO_Y
    rebuilt = reconstruct_joint_directed(mp, decision)
    assert rebuilt.directed == joint.directed and not rebuilt.bidirected


def test_reconstruct_inconsistent_marginals():
    gx = g(("X", "Z1", "Z2"), [("Z1", "Z2"), ("X", "Z1")])
    gy = g(("Y", "Z1", "Z2"), [("Z2", "Z1"), ("Y", "Z1")])
    mp = MarginalPair(gx, gy, "X", "Y")
    # The Z1-Z2 edge points in opposite directions in the two marginals, so
    # no joint DAG can explain both regardless of the claimed X-Y status.
    with pytest.raises(InconsistentMarginals):
        reconstruct_joint_directed(mp, EdgeDecision(Verdict.ABSENT, ()))


def test_reconstruct_ambiguous():
    # An extra cause-side parent edge can always be explained through the
    # decided edge, so this pair admits two joints.
    joint = g(("Z1", "X", "Y", "Z2"), [("Z1", "X"), ("X", "Y"), ("X", "Z2")])
    mp = pair_from_joint(joint, "X", "Y")
    decision = classify_edge_dag(mp)
    assert decision.verdict is Verdict.X_TO_Y
    with pytest.raises(AmbiguousReconstruction):
        reconstruct_joint_directed(mp, decision)


def test_reconstruct_requires_decision():
    gx = g(("X", "Z"))
    gy = g(("Y", "Z"))
    mp = MarginalPair(gx, gy, "X", "Y")
    with pytest.raises(PreconditionError):
        reconstruct_joint_directed(mp, classify_edge_dag(mp))


def test_reconstruct_projects_back_on_random_dags():
    hits = 0
    for seed in range(60):
        joint = generate_er_dag(GraphGenConfig(5, 0.4, 0.0, seed))
        for x, y in itertools.combinations(joint.nodes, 2):
            mp = pair_from_joint(joint, x, y)
            decision = classify_edge_dag(mp)
            if decision.verdict is Verdict.UNDECIDABLE:
                continue
            try:
                rebuilt = reconstruct_joint_directed(mp, decision)
            except AmbiguousReconstruction:
                continue
            hits += 1
            assert latent_project(rebuilt, y).directed == mp.gx.directed
            assert latent_project(rebuilt, x).directed == mp.gy.directed
    assert hits > 50


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_decision_json_shape():
    gx = g(("X", "Z1", "Z2"), [("X", "Z1"), ("X", "Z2")])
    gy = g(("Y", "Z1", "Z2"), [("Y", "Z2")])
    decision = exclude_link_admg(MarginalPair(gx, gy, "X", "Y"))
    obj = decision.to_json()
    assert obj["verdict"] == "Absent"
    assert obj["trace"][0]["lemma"] == 2 and obj["trace"][0]["witness"] == "Z1"
