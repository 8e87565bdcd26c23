import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import numpy as np

from spinlab.errors import (
    DegreeBoundViolatedError,
    InvalidParametersError,
    NonBipartiteError,
    TerminalOverlapError,
    UnknownVertexError,
)
from spinlab.model import (
    BipartiteMultigraph,
    SpinParams,
    build_graph,
    graph_from_json_dict,
    to_weighted_network,
)


def test_spin_params_validation():
    p = SpinParams(0.5, 0.2, 1.0, 4)
    assert p.is_antiferromagnetic and not p.is_ferromagnetic
    assert SpinParams(2.0, 3.0, 1.0).is_ferromagnetic
    assert SpinParams(2.0, 0.5, 1.0).is_degenerate
    with pytest.raises(InvalidParametersError):
        SpinParams(-1.0, 0.0, 1.0)
    with pytest.raises(InvalidParametersError):
        SpinParams(1.0, 0.0, 0.0)
    with pytest.raises(InvalidParametersError):
        SpinParams(1.0, 0.0, 1.0, delta=2)


def test_build_graph_smallest():
    g = build_graph([("a", "L"), ("b", "R")], [("a", "b")])
    assert g.degree("a") == 1 and g.degree("b") == 1
    assert g.n_edges == 1


def test_build_graph_rejects_same_side_edge():
    with pytest.raises(NonBipartiteError):
        build_graph([("a", "L"), ("b", "L")], [("a", "b")])


def test_build_graph_rejects_unknown_vertex():
    with pytest.raises(UnknownVertexError):
        build_graph([("a", "L")], [("a", "zzz")])


def test_build_graph_rejects_terminal_overlap():
    with pytest.raises(TerminalOverlapError):
        build_graph([("a", "L"), ("b", "R")], [], terminals=(("a",), ("a",)))


def test_terminals_must_sit_on_opposite_sides():
    with pytest.raises(NonBipartiteError):
        build_graph(
            [("a", "L"), ("b", "L"), ("c", "R")], [], terminals=(("a",), ("b",))
        )


def test_degree_bound_enforced_with_terminal_slack():
    verts = [("c", "L"), ("x", "R"), ("y", "R"), ("z", "R")]
    edges = [("c", "x"), ("c", "y"), ("c", "z")]
    build_graph(verts, edges, degree_bound=3)
    with pytest.raises(DegreeBoundViolatedError):
        build_graph(verts, edges, degree_bound=2)
    # terminals only get degree_bound - 1
    with pytest.raises(DegreeBoundViolatedError):
        build_graph(verts, edges, terminals=(("c",), ()), degree_bound=3)


def test_multiplicities_merge():
    g = build_graph([("a", "L"), ("b", "R")], [("a", "b", 2), ("b", "a", 3)])
    assert g.edges == (("a", "b", 5),)
    assert g.degree("a") == 5


def test_network_transcription_single_edge():
    g = build_graph([("a", "L"), ("b", "R")], [("a", "b")])
    net = to_weighted_network(g, SpinParams(2.0, 3.0, 1.0))
    assert np.allclose(net.vertex_weights, [[1, 1], [1, 1]])
    assert np.allclose(np.exp(net.edge_log[0]), [2, 1, 1, 3])


def test_network_field_subset_only_listed_vertices():
    g = build_graph([("a", "L"), ("b", "R")], [], field_subset={"b"})
    net = to_weighted_network(g, SpinParams(1.0, 1.0, 2.0))
    weights = {vid: tuple(net.vertex_weights[i]) for i, vid in enumerate(net.ids)}
    assert weights["b"] == (1.0, 2.0)
    assert weights["a"] == (1.0, 1.0)


def test_network_multiplicity_is_elementwise_power():
    g = build_graph([("a", "L"), ("b", "R")], [("a", "b", 4)])
    net = to_weighted_network(g, SpinParams(0.5, 0.5, 1.0))
    assert np.allclose(np.exp(net.edge_log[0]), [0.0625, 1.0, 1.0, 0.0625])


@st.composite
def graph_dicts(draw):
    n = draw(st.integers(2, 8))
    n_left = draw(st.integers(1, n - 1))
    ids = [f"v{i}" for i in range(n)]
    left, right = ids[:n_left], ids[n_left:]
    n_edges = draw(st.integers(0, 2 * n))
    edges = {}
    for _ in range(n_edges):
        u = draw(st.sampled_from(left))
        v = draw(st.sampled_from(right))
        edges[(u, v)] = draw(st.integers(1, 4))
    with_field = draw(st.booleans())
    field = sorted(draw(st.sets(st.sampled_from(ids)))) if with_field else None
    return {
        "vertices": [{"id": v, "side": "L" if v in left else "R"} for v in ids],
        "edges": [{"u": u, "v": v, "mult": m} for (u, v), m in sorted(edges.items())],
        **({"field_subset": field} if field is not None else {}),
    }


@given(graph_dicts())
@settings(max_examples=40, deadline=None)
def test_json_round_trip_lossless(data):
    g = graph_from_json_dict(data)
    again = graph_from_json_dict(g.to_json_dict())
    assert again == g
    assert again.to_json_dict() == g.to_json_dict()


def test_json_round_trip_with_terminals():
    g = build_graph(
        [("a", "L"), ("b", "R"), ("c", "L")],
        [("a", "b", 2)],
        field_subset={"a", "c"},
        terminals=(("a",), ("b",)),
    )
    assert graph_from_json_dict(g.to_json_dict()) == g
