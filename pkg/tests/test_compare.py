import json
import random

from grfnkit import compare, fortran, grounding, ir
from grfnkit.grfn import FunctionNode, Grfn, VariableNode, lower

import oracles


def _vid(name):
    return f"T::{name}::0"


def _fid(k):
    return f"T::ASSIGN::{k}"


def _chain_network():
    """x -> f0 -> y -> f1 -> z with side input w; u -> f2 -> v apart."""
    V, F = VariableNode, FunctionNode
    return Grfn(
        scope="T",
        variables=tuple(V(n, 0, "T") for n in "XYZWUV"),
        functions=(
            F(_fid(0), "ASSIGN", (_vid("X"),), _vid("Y"), ir.Var("X"), ""),
            F(_fid(1), "ASSIGN", (_vid("Y"), _vid("W")), _vid("Z"),
              ir.Binary("ADD", ir.Var("Y"), ir.Var("W")), ""),
            F(_fid(2), "ASSIGN", (_vid("U"),), _vid("V"), ir.Var("U"), ""),
        ),
        edges=(
            (_vid("X"), _fid(0)), (_fid(0), _vid("Y")),
            (_vid("Y"), _fid(1)), (_vid("W"), _fid(1)), (_fid(1), _vid("Z")),
            (_vid("U"), _fid(2)), (_fid(2), _vid("V")),
        ),
        inputs=("X", "W", "U"),
        outputs=(("Y", 0), ("Z", 0), ("V", 0)),
    )


# ---------------------------------------------------------------------------
# Node classification

def test_chain_classification():
    classes = compare.classify_nodes(_chain_network(), {_vid("X"), _vid("Z")})
    assert classes == {
        _vid("X"): compare.SHARED, _vid("Z"): compare.SHARED,
        _fid(0): compare.PATH, _vid("Y"): compare.PATH, _fid(1): compare.PATH,
        _vid("W"): compare.CONTROL,
        _vid("U"): compare.ISOLATED, _fid(2): compare.ISOLATED,
        _vid("V"): compare.ISOLATED,
    }


def test_empty_shared_isolates_everything():
    classes = compare.classify_nodes(_chain_network(), set())
    assert set(classes.values()) == {compare.ISOLATED}


def test_producer_of_control_variable_joins_control():
    V, F = VariableNode, FunctionNode
    network = Grfn(
        scope="T",
        variables=tuple(V(n, 0, "T") for n in "XYZWQ"),
        functions=(
            F(_fid(0), "ASSIGN", (_vid("X"),), _vid("Y"), ir.Var("X"), ""),
            F(_fid(1), "ASSIGN", (_vid("Y"), _vid("W")), _vid("Z"),
              ir.Var("Y"), ""),
            F(_fid(2), "ASSIGN", (_vid("Q"),), _vid("W"), ir.Var("Q"), ""),
        ),
        edges=(
            (_vid("X"), _fid(0)), (_fid(0), _vid("Y")),
            (_vid("Y"), _fid(1)), (_vid("W"), _fid(1)), (_fid(1), _vid("Z")),
            (_vid("Q"), _fid(2)), (_fid(2), _vid("W")),
        ),
        inputs=("X", "Q"),
        outputs=(("Y", 0), ("Z", 0), ("W", 0)),
    )
    classes = compare.classify_nodes(network, {_vid("X"), _vid("Z")})
    assert classes[_vid("W")] == compare.CONTROL
    assert classes[_fid(2)] == compare.CONTROL  # producer, one hop only
    assert classes[_vid("Q")] == compare.ISOLATED


def test_classification_is_total_partition():
    network = _chain_network()
    classes = compare.classify_nodes(network, {_vid("Y")})
    all_ids = {v.id for v in network.variables} | {f.id for f in network.functions}
    assert set(classes) == all_ids
    assert set(classes.values()) <= set(compare.CLASSES)


def test_classification_matches_bruteforce_oracle():
    rng = random.Random(424242)
    for _ in range(60):
        network, shared = oracles.random_bipartite_grfn(rng)
        got = compare.classify_nodes(network, shared)
        node_ids = [v.id for v in network.variables] + \
                   [f.id for f in network.functions]
        producer = {v.id: (network.producer_of(v.id).id
                           if network.producer_of(v.id) else None)
                    for v in network.variables}
        want = oracles.brute_force_classes(node_ids, network.edges, shared,
                                           producer)
        assert got == want


# ---------------------------------------------------------------------------
# Variable matching across networks

def test_self_comparison_shares_everything(lais_unit):
    network = lower(lais_unit).with_groundings(
        grounding.container_records(lais_unit))
    pairs = compare.shared_variables(network, network)
    assert len(pairs) == 10
    assert all(na == nb and score == 1.0 for na, nb, score in pairs)

    report = compare.structural_compare(network, network)
    counts = report.summary(report.classes_a)
    assert counts["SHARED"] == len(network.variables)
    assert counts["PATH"] == len(network.functions)
    assert counts["CONTROL"] == 0 and counts["ISOLATED"] == 0
    assert report.classes_a == report.classes_b


def test_renamed_variable_matched_by_description(fixtures_dir, lais_unit):
    other_unit = fortran.parse_source(
        (fixtures_dir / "lais_deltn.f").read_text(encoding="utf-8"),
        path="lais_deltn.f").container("LAISB")
    a = lower(lais_unit).with_groundings(grounding.container_records(lais_unit))
    b = lower(other_unit).with_groundings(grounding.container_records(other_unit))

    pairs = compare.shared_variables(a, b)
    matched = {na: nb for na, nb, _ in pairs}
    assert matched["DN"] == "DELTN"
    assert len(pairs) == 10  # FAC on the B side stays unmatched

    report = compare.structural_compare(a, b)
    assert report.scope_a == "LAIS" and report.scope_b == "LAISB"
    summary_b = report.summary(report.classes_b)
    assert summary_b["SHARED"] >= 10
    fac_ids = [v.id for v in b.variables if v.name == "FAC"]
    assert fac_ids and all(report.classes_b[i] != compare.SHARED
                           for i in fac_ids)


def test_disjoint_networks_share_nothing():
    lone = Grfn(scope="Q", variables=(VariableNode("QQQJJJ", 0, "Q"),),
                functions=(), edges=(), inputs=("QQQJJJ",), outputs=())
    assert compare.shared_variables(_chain_network(), lone) == ()


def test_greedy_matching_is_injective():
    # Two a-side names compete for one b-side name; only one wins.
    a = Grfn(scope="A",
             variables=(VariableNode("TMP", 0, "A"), VariableNode("TMP2", 0, "A")),
             functions=(), edges=(), inputs=("TMP", "TMP2"), outputs=())
    b = Grfn(scope="B", variables=(VariableNode("TMP", 0, "B"),),
             functions=(), edges=(), inputs=("TMP",), outputs=())
    pairs = compare.shared_variables(a, b)
    assert [(na, nb) for na, nb, _ in pairs] == [("TMP", "TMP")]


# ---------------------------------------------------------------------------
# Reports

def test_report_json_shape(lais_unit):
    network = lower(lais_unit)
    report = compare.structural_compare(network, network)
    blob = report.to_json_dict()
    json.dumps(blob)  # must be serializable
    assert set(blob) == {"shared", "a", "b"}
    assert blob["a"]["scope"] == "LAIS"
    assert set(blob["a"]["summary"]) == set(compare.CLASSES)
    listed = dict(tuple(pair[:2]) for pair in blob["shared"])
    assert listed["DLAI"] == "DLAI"


def test_comparison_dot_clusters_and_colors(lais_unit):
    network = lower(lais_unit)
    report = compare.structural_compare(network, network)
    dot = compare.comparison_dot(network, network, report)
    assert "cluster_a" in dot and "cluster_b" in dot
    assert "color=blue" in dot  # shared nodes
    assert '"a|LAIS::DLAI::1"' in dot and '"b|LAIS::DLAI::1"' in dot
