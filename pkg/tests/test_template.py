import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from conftest import path_graph, random_graph, star_graph
from hetprompt.graph import LabelSet, make_graph
from hetprompt.template import (
    Subgraph,
    context_subgraph,
    ego_networks,
    graph_template,
    template_of_subgraph,
)


def _members(view):
    return view.member_nodes.tolist()


def test_homogeneous_graph_gives_two_identical_views():
    g = path_graph(4)
    views = graph_template(g)
    assert len(views) == 2
    assert _members(views[0]) == _members(views[1])
    assert views[0].edge_set() == views[1].edge_set()


def test_toy_template(toy_graph):
    v0, va, vb = graph_template(toy_graph)
    assert _members(v0) == [0, 1, 2]
    assert v0.edge_set() == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert _members(va) == [0, 1] and va.edge_set() == {(0, 1), (1, 0)}
    assert _members(vb) == [2] and vb.edge_set() == set()


def test_eight_types_give_nine_views():
    g = make_graph(np.arange(8), [(0, 1, 0)], np.ones((8, 1)), num_node_types=8)
    assert len(graph_template(g)) == 9


def test_type_without_nodes_gives_empty_view():
    g = make_graph([0, 0], [(0, 1, 0)], np.ones((2, 1)), num_node_types=3)
    views = graph_template(g)
    assert views[2].num_nodes == 0 and views[3].num_nodes == 0


def test_context_subgraph_zero_hops(toy_graph):
    sub = context_subgraph(toy_graph, 1, 0)
    assert sub.member_nodes.tolist() == [1] and len(sub.edges) == 0 and sub.center == 1


def test_context_subgraph_path():
    sub = context_subgraph(path_graph(4), 1, 1)
    assert sub.member_nodes.tolist() == [0, 1, 2]
    assert {tuple(e) for e in sub.edges[:, :2].tolist()} == {(0, 1), (1, 0), (1, 2), (2, 1)}


def test_context_subgraph_keeps_edge_types(toy_graph):
    sub = context_subgraph(toy_graph, 2, 1)
    assert sorted(sub.edges.tolist()) == [[1, 2, 1], [2, 1, 1]]


def test_context_subgraph_errors(toy_graph):
    with pytest.raises(IndexError):
        context_subgraph(toy_graph, 3, 1)
    with pytest.raises(ValueError):
        context_subgraph(toy_graph, 0, -1)


def test_context_subgraph_matches_shortest_paths(rng):
    for _ in range(30):
        g = random_graph(rng, n=15, p=0.15)
        adj = csr_matrix((np.ones(len(g.edges)), (g.edges[:, 0], g.edges[:, 1])), shape=(15, 15))
        dist = shortest_path(adj, unweighted=True)
        for delta in range(4):
            v = int(rng.integers(15))
            expected = np.flatnonzero(dist[v] <= delta).tolist()
            sub = context_subgraph(g, v, delta)
            assert sub.member_nodes.tolist() == expected
            # monotone in delta
            assert set(sub.member_nodes.tolist()) <= set(context_subgraph(g, v, delta + 1).member_nodes.tolist())


def test_ego_networks_star():
    g = star_graph(4)
    labels = LabelSet({0: 1, 3: 0}, 2)
    egos = ego_networks(g, labels, 1)
    assert len(egos) == 2
    center, leaf = egos
    assert center[0].member_nodes.tolist() == [0, 1, 2, 3, 4] and center[1] == 1
    assert leaf[0].member_nodes.tolist() == [0, 3] and leaf[1] == 0
    assert len(leaf[0].edges) == 2  # one undirected edge


def test_ego_networks_one_per_target(rng):
    g = random_graph(rng, n=12)
    labels = LabelSet({1: 0, 4: 1, 7: 0}, 2)
    assert len(ego_networks(g, labels, 1)) == 3
    with pytest.raises(ValueError):
        ego_networks(g, LabelSet({}, 2), 1)


def test_template_of_whole_graph_equals_graph_template(rng):
    g = random_graph(rng, n=12)
    sub = Subgraph(None, np.arange(12), g.edges)
    for a, b in zip(template_of_subgraph(sub, g), graph_template(g)):
        assert _members(a) == _members(b) and a.edge_set() == b.edge_set()


def test_template_of_subgraph_induced(toy_graph):
    sub = Subgraph(None, np.array([0, 2]), np.zeros((0, 3), dtype=int))
    v0, va, vb = template_of_subgraph(sub, toy_graph)
    assert _members(v0) == [0, 2] and v0.edge_set() == set()
    assert _members(va) == [0] and _members(vb) == [2]


def test_template_of_subgraph_missing_type(toy_graph):
    sub = context_subgraph(toy_graph, 0, 1)
    views = template_of_subgraph(sub, toy_graph)
    assert views[2].num_nodes == 0


def test_homogeneous_subgraph_template_idempotent():
    g = path_graph(5)
    sub = context_subgraph(g, 2, 1)
    v0, v1 = template_of_subgraph(sub, g)
    assert _members(v0) == _members(v1) and v0.edge_set() == v1.edge_set()


def test_edge_conservation(rng):
    for _ in range(50):
        g = random_graph(rng, n=20, num_types=4, p=0.2)
        views = graph_template(g)
        for a, b in views[0].edge_set():
            hits = sum((a, b) in v.edge_set() for v in views[1:])
            assert hits == (1 if g.node_type[a] == g.node_type[b] else 0)
