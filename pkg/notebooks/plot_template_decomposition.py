"""
Splitting a heterogeneous graph into homogeneous views
======================================================

A small graph with two node types is broken into one full view and one
view per node type. Cross-type edges survive only in the full view.
"""

import numpy as np

from hetprompt import gen_synthetic, graph_template, context_subgraph

graph, labels = gen_synthetic(num_types=2, nodes_per_type=8, seed=3)
print("nodes", graph.num_nodes, "undirected edges", len(graph.undirected_edges()))

views = graph_template(graph)
for view in views:
    kind = "full" if view.view_index == 0 else f"type {view.view_index - 1}"
    print(f"view {view.view_index} ({kind}): {view.num_nodes} nodes, {len(view.edges) // 2} edges")

# intra-type edges of the typed views add up to the full view minus the cross-type edges
und = graph.undirected_edges()
cross = np.sum(graph.node_type[und[:, 0]] != graph.node_type[und[:, 1]])
typed = sum(len(v.edges) // 2 for v in views[1:])
print("cross-type edges", cross, "+ typed-view edges", typed, "=", cross + typed)

# a 1-hop context subgraph ignores types while expanding
sub = context_subgraph(graph, 0, 1)
print("context of node 0:", sub.member_nodes.tolist())
