"""Graph templates: per-type homogeneous views, context subgraphs, ego networks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import HeteroGraph, LabelSet


@dataclass(frozen=True, eq=False)
class HomoView:
    """One homogeneous graph of a template.

    ``view_index`` 0 is the full, type-agnostic topology; ``i >= 1`` holds the
    nodes of type ``i - 1`` and the edges among them. ``edges`` are local
    index pairs into ``member_nodes`` and are stored in both directions.
    """

    view_index: int
    member_nodes: np.ndarray
    edges: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.member_nodes)

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as original node-id pairs."""
        m = self.member_nodes
        return {(int(m[a]), int(m[b])) for a, b in self.edges.tolist()}


@dataclass(frozen=True, eq=False)
class Subgraph:
    center: int | None
    member_nodes: np.ndarray
    edges: np.ndarray  # (src, dst, edge_type) in original node ids


def _view(graph: HeteroGraph, index: int, members: np.ndarray, edges: np.ndarray) -> HomoView:
    local = np.full(graph.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    la, lb = local[edges[:, 0]], local[edges[:, 1]]
    keep = (la >= 0) & (lb >= 0)
    return HomoView(index, members, np.stack([la[keep], lb[keep]], axis=1).reshape(-1, 2))


def graph_template(graph: HeteroGraph) -> list[HomoView]:
    """Split ``graph`` into ``num_node_types + 1`` homogeneous views.

    >>> from hetprompt.graph import make_graph
    >>> g = make_graph([0, 0, 1], [(0, 1, 0), (1, 2, 0)], [[1.0], [1.0], [1.0]])
    >>> [v.num_nodes for v in graph_template(g)]
    [3, 2, 1]
    """
    return template_of_nodes(graph, np.arange(graph.num_nodes))


def template_of_nodes(graph: HeteroGraph, nodes) -> list[HomoView]:
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    views = [_view(graph, 0, nodes, graph.edges)]
    types = graph.node_type[nodes]
    for t in range(graph.num_node_types):
        views.append(_view(graph, t + 1, nodes[types == t], graph.edges))
    return views


def template_of_subgraph(sub: Subgraph, graph: HeteroGraph) -> list[HomoView]:
    """Graph template applied to the subgraph induced by ``sub.member_nodes``."""
    return template_of_nodes(graph, sub.member_nodes)


def _bfs(neighbors: list[np.ndarray], v: int, delta: int) -> np.ndarray:
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == delta:
            continue
        for w in neighbors[u].tolist():
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return np.array(sorted(dist), dtype=np.int64)


def _induced_edges(graph: HeteroGraph, members: np.ndarray) -> np.ndarray:
    inside = np.zeros(graph.num_nodes, dtype=bool)
    inside[members] = True
    mask = inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]
    return graph.edges[mask]


def context_subgraph(graph: HeteroGraph, v: int, delta: int, neighbors=None) -> Subgraph:
    """Nodes within ``delta`` hops of ``v`` (type-agnostic BFS) and their induced edges."""
    if not 0 <= v < graph.num_nodes:
        raise IndexError(f"node {v} out of range for graph with {graph.num_nodes} nodes")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if neighbors is None:
        neighbors = graph.neighbors()
    members = _bfs(neighbors, int(v), delta)
    return Subgraph(int(v), members, _induced_edges(graph, members))


def context_members(graph: HeteroGraph, delta: int) -> list[np.ndarray]:
    """Sorted context-subgraph node sets for every node."""
    neighbors = graph.neighbors()
    return [_bfs(neighbors, v, delta) for v in range(graph.num_nodes)]


def ego_networks(graph: HeteroGraph, labels: LabelSet, delta: int) -> list[tuple[Subgraph, int]]:
    """One context subgraph per labeled node, carrying that node's class."""
    if not labels.labels:
        raise ValueError("ego_networks needs at least one labeled node")
    neighbors = graph.neighbors()
    return [(context_subgraph(graph, v, delta, neighbors), labels.labels[v])
            for v in sorted(labels.labels)]
