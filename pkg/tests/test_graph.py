import pytest
from hypothesis import given, strategies as st

from d2tgraph.graph import (Node, NodeKind, UnifiedGraph, add_reverse_edges, build_graph, errors_only,
                            neighbors, validate_graph)

E = NodeKind.ENTITY


def g2(edges, directed_only=False, n=2):
    return build_graph([(chr(65 + i), E) for i in range(n)], edges, directed_only)


def test_valid_graph_has_empty_report():
    assert validate_graph(g2({(0, 1), (1, 0)})) == []


def test_missing_reverse_edge_reported_once():
    report = validate_graph(g2({(0, 1)}))
    assert [v.code for v in report] == ["asymmetry"]
    assert report[0].message == "missing reverse edge (1,0)"


def test_self_loop_reported():
    g = UnifiedGraph((Node(0, "A", E),), frozenset({(0, 0)}))
    report = validate_graph(g)
    assert [v.code for v in report] == ["self-loop"]


def test_dangling_endpoint_reported():
    g = UnifiedGraph((Node(0, "A", E),), frozenset({(0, 3)}), directed_only=True)
    assert [v.code for v in validate_graph(g)] == ["dangling"]


def test_disconnection_is_a_warning():
    report = validate_graph(g2(set(), n=2))
    assert [(v.code, v.severity) for v in report] == [("disconnected", "warning")]
    assert errors_only(report) == []


def test_directed_only_suppresses_asymmetry():
    assert validate_graph(g2({(0, 1)}, directed_only=True)) == []


def test_validate_does_not_mutate():
    g = g2({(0, 1)})
    before = g.to_json()
    validate_graph(g)
    assert g.to_json() == before


@pytest.mark.parametrize("edges, expected", [
    ({(0, 1)}, {(0, 1), (1, 0)}),
    ({(0, 1), (1, 0)}, {(0, 1), (1, 0)}),
    ({(0, 1), (1, 2)}, {(0, 1), (1, 0), (1, 2), (2, 1)}),
])
def test_add_reverse_edges(edges, expected):
    g = add_reverse_edges(g2(edges, directed_only=True, n=3))
    assert set(g.edges) == expected
    assert g.directed_only is False


def test_neighbors_star_and_path():
    star = add_reverse_edges(g2({(0, 1), (0, 2)}, n=3))
    assert neighbors(star, 0) == [1, 2]
    assert neighbors(star, 1) == [0]
    path = add_reverse_edges(g2({(0, 1), (1, 2)}, n=3))
    assert neighbors(path, 1) == [0, 2]


def test_neighbors_out_of_range():
    with pytest.raises(IndexError, match="node out of range"):
        neighbors(g2(set()), 5)


def test_node_rejects_blank_text():
    with pytest.raises(ValueError):
        Node(0, "   ", E)


def test_json_round_trip_and_edge_order():
    g = g2({(1, 0), (0, 1)})
    d = g.to_dict()
    assert d["edges"] == [[0, 1], [1, 0]]
    assert UnifiedGraph.from_json(g.to_json()) == g


@st.composite
def random_graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    edges = draw(st.sets(st.sampled_from(pairs), max_size=len(pairs))) if pairs else set()
    return g2(edges, directed_only=True, n=n)


@given(random_graphs())
def test_reverse_edges_idempotent_and_symmetric(g):
    once = add_reverse_edges(g)
    assert add_reverse_edges(once).edges == once.edges
    assert not [v for v in validate_graph(once) if v.code == "asymmetry"]
    for v in range(len(once)):
        for u in neighbors(once, v):
            assert v in neighbors(once, u)
