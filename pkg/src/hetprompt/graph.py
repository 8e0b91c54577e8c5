"""Heterogeneous graph data model, validation, file I/O and synthetic generation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised when a graph or label file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    """Typed, undirected graph with a dense feature matrix.

    ``edges`` is an ``(m, 3)`` integer array of ``(src, dst, edge_type)`` rows.
    Use :func:`make_graph` to build one from raw, possibly asymmetric input;
    the constructor stores whatever it is given so that :func:`validate` can
    report problems.
    """

    num_nodes: int
    node_type: np.ndarray
    edges: np.ndarray
    num_node_types: int
    num_edge_types: int
    features: np.ndarray
    node_ids: tuple[str, ...] | None = None
    type_names: tuple[str, ...] | None = None
    edge_type_names: tuple[str, ...] | None = None

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def is_homogeneous(self) -> bool:
        return self.num_node_types == 1 and self.num_edge_types == 1

    def neighbors(self) -> list[np.ndarray]:
        """Sorted neighbor arrays, one per node."""
        order = np.lexsort((self.edges[:, 1], self.edges[:, 0]))
        src = self.edges[order, 0]
        dst = self.edges[order, 1]
        bounds = np.searchsorted(src, np.arange(self.num_nodes + 1))
        return [dst[bounds[i]:bounds[i + 1]] for i in range(self.num_nodes)]

    def undirected_edges(self) -> np.ndarray:
        """Each stored edge once, as ``(a, b, type)`` with ``a < b``."""
        return self.edges[self.edges[:, 0] < self.edges[:, 1]]

    def without_edges(self, pairs) -> "HeteroGraph":
        """Copy of the graph with the given undirected pairs removed."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) == 0:
            return self
        n = self.num_nodes
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        drop = set((lo * n + hi).tolist())
        a = np.minimum(self.edges[:, 0], self.edges[:, 1])
        b = np.maximum(self.edges[:, 0], self.edges[:, 1])
        keep = ~np.isin(a * n + b, np.fromiter(drop, dtype=np.int64, count=len(drop)))
        return _replace_edges(self, self.edges[keep])

    def induced(self, nodes) -> "HeteroGraph":
        """Induced subgraph on ``nodes``; node order follows ``nodes``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        local = np.full(self.num_nodes, -1, dtype=np.int64)
        local[nodes] = np.arange(len(nodes))
        src, dst = local[self.edges[:, 0]], local[self.edges[:, 1]]
        mask = (src >= 0) & (dst >= 0)
        edges = np.stack([src[mask], dst[mask], self.edges[mask, 2]], axis=1)
        ids = None if self.node_ids is None else tuple(self.node_ids[i] for i in nodes)
        return HeteroGraph(
            num_nodes=len(nodes),
            node_type=self.node_type[nodes].copy(),
            edges=_canonical_order(edges),
            num_node_types=self.num_node_types,
            num_edge_types=self.num_edge_types,
            features=self.features[nodes].copy(),
            node_ids=ids,
            type_names=self.type_names,
            edge_type_names=self.edge_type_names,
        )


@dataclass
class LabelSet:
    """Class labels for nodes (``target="node"``) or graphs (``target="graph"``)."""

    labels: dict[int, int]
    num_classes: int
    target: str = "node"
    class_names: tuple[str, ...] | None = None

    def instances(self) -> np.ndarray:
        return np.array(sorted(self.labels), dtype=np.int64)

    def by_class(self) -> dict[int, list[int]]:
        groups: dict[int, list[int]] = {c: [] for c in range(self.num_classes)}
        for inst in sorted(self.labels):
            groups[self.labels[inst]].append(inst)
        return groups


@dataclass
class ValidationReport:
    ok: bool
    homogeneous: bool
    violations: list[tuple[str, list[int]]] = field(default_factory=list)

    def __str__(self) -> str:
        if self.ok:
            return "ok (homogeneous)" if self.homogeneous else "ok"
        return "\n".join(f"{kind}: {idx[:10]}" for kind, idx in self.violations)


def _canonical_order(edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def _replace_edges(graph: HeteroGraph, edges: np.ndarray) -> HeteroGraph:
    return HeteroGraph(
        num_nodes=graph.num_nodes,
        node_type=graph.node_type,
        edges=edges,
        num_node_types=graph.num_node_types,
        num_edge_types=graph.num_edge_types,
        features=graph.features,
        node_ids=graph.node_ids,
        type_names=graph.type_names,
        edge_type_names=graph.edge_type_names,
    )


def normalize_edges(edges) -> np.ndarray:
    """Symmetrize, drop self-loops and deduplicate an edge array.

    When a node pair occurs with several edge types, the first occurrence wins.
    The result is sorted by ``(src, dst)``.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    edges = edges[edges[:, 0] != edges[:, 1]]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    span = int(hi.max(initial=0)) + 1
    _, first = np.unique(lo * span + hi, return_index=True)
    und = np.stack([lo[first], hi[first], edges[first, 2]], axis=1)
    return _canonical_order(np.concatenate([und, und[:, [1, 0, 2]]]))


def make_graph(
    node_type,
    edges,
    features,
    num_node_types: int | None = None,
    num_edge_types: int | None = None,
    node_ids: Sequence[str] | None = None,
    type_names: Sequence[str] | None = None,
    edge_type_names: Sequence[str] | None = None,
) -> HeteroGraph:
    """Build a normalized :class:`HeteroGraph` (undirected, no loops, no duplicates)."""
    node_type = np.asarray(node_type, dtype=np.int64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if num_node_types is None:
        num_node_types = int(node_type.max(initial=0)) + 1
    if num_edge_types is None:
        num_edge_types = int(edges[:, 2].max(initial=0)) + 1
    return HeteroGraph(
        num_nodes=len(node_type),
        node_type=node_type,
        edges=normalize_edges(edges),
        num_node_types=int(num_node_types),
        num_edge_types=int(num_edge_types),
        features=features,
        node_ids=None if node_ids is None else tuple(node_ids),
        type_names=None if type_names is None else tuple(type_names),
        edge_type_names=None if edge_type_names is None else tuple(edge_type_names),
    )


def validate(graph: HeteroGraph) -> ValidationReport:
    """Check every structural invariant; never raises."""
    violations: list[tuple[str, list[int]]] = []
    n = graph.num_nodes
    edges = np.asarray(graph.edges).reshape(-1, 3)
    node_type = np.asarray(graph.node_type)

    if len(node_type) != n:
        violations.append(("node type count mismatch", [len(node_type), n]))
    else:
        bad = np.flatnonzero((node_type < 0) | (node_type >= graph.num_node_types))
        if len(bad):
            violations.append(("node type out of range", bad.tolist()))

    out = np.flatnonzero((edges[:, :2] < 0).any(axis=1) | (edges[:, :2] >= n).any(axis=1))
    if len(out):
        violations.append(("edge endpoint out of range", out.tolist()))
    bad_et = np.flatnonzero((edges[:, 2] < 0) | (edges[:, 2] >= graph.num_edge_types))
    if len(bad_et):
        violations.append(("edge type out of range", bad_et.tolist()))
    loops = np.flatnonzero(edges[:, 0] == edges[:, 1])
    if len(loops):
        violations.append(("self-loop", loops.tolist()))

    pairs = [tuple(e) for e in edges[:, :2].tolist()]
    present = set(pairs)
    if len(present) != len(pairs):
        seen, dup = set(), []
        for i, p in enumerate(pairs):
            if p in seen:
                dup.append(i)
            seen.add(p)
        violations.append(("duplicate edge", dup))
    asym = [i for i, (a, b) in enumerate(pairs) if (b, a) not in present]
    if asym:
        violations.append(("asymmetric edge", asym))

    feats = np.asarray(graph.features)
    if feats.ndim != 2 or feats.shape[0] != n or feats.shape[1] < 1:
        violations.append(("feature shape mismatch", list(feats.shape)))
    elif not np.all(np.isfinite(feats)):
        violations.append(("non-finite feature", np.flatnonzero(~np.isfinite(feats).all(axis=1)).tolist()))

    homogeneous = graph.num_node_types == 1 and graph.num_edge_types == 1
    return ValidationReport(ok=not violations, homogeneous=homogeneous, violations=violations)


def disjoint_union(graphs: Sequence[HeteroGraph]) -> HeteroGraph:
    """Place several graphs with a shared type vocabulary side by side."""
    if len(graphs) == 1:
        return graphs[0]
    offset = 0
    edges, types, feats = [], [], []
    for g in graphs:
        e = g.edges.copy()
        e[:, :2] += offset
        edges.append(e)
        types.append(g.node_type)
        feats.append(g.features)
        offset += g.num_nodes
    return make_graph(
        np.concatenate(types),
        np.concatenate(edges),
        np.concatenate(feats),
        num_node_types=max(g.num_node_types for g in graphs),
        num_edge_types=max(g.num_edge_types for g in graphs),
        type_names=graphs[0].type_names,
        edge_type_names=graphs[0].edge_type_names,
    )


# -- file I/O ----------------------------------------------------------------

def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_graph(node_path, edge_path, label_path=None) -> tuple[HeteroGraph, LabelSet | None]:
    """Read the tab-separated node/edge/label files into a graph.

    External ids may be arbitrary strings; they are densified in file order
    and kept in ``graph.node_ids``.
    """
    ids: list[str] = []
    index: dict[str, int] = {}
    type_index: dict[str, int] = {}
    node_type: list[int] = []
    rows: list[list[float]] = []
    dim = None
    for lineno, parts in _data_lines(node_path):
        if len(parts) != 3:
            raise GraphFormatError(f"{node_path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        nid, tname, ftext = parts
        if nid in index:
            raise GraphFormatError(f"{node_path}:{lineno}: duplicate node id {nid!r}")
        try:
            row = [float(x) for x in ftext.split(",")]
        except ValueError:
            raise GraphFormatError(f"{node_path}:{lineno}: malformed feature list") from None
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise GraphFormatError(f"{node_path}:{lineno}: ragged feature row ({len(row)} values, expected {dim})")
        index[nid] = len(ids)
        ids.append(nid)
        node_type.append(type_index.setdefault(tname, len(type_index)))
        rows.append(row)
    if not ids:
        raise GraphFormatError(f"{node_path}: no nodes")

    etype_index: dict[str, int] = {}
    edges: list[tuple[int, int, int]] = []
    for lineno, parts in _data_lines(edge_path):
        if len(parts) != 3:
            raise GraphFormatError(f"{edge_path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        src, dst, ename = parts
        for end in (src, dst):
            if end not in index:
                raise GraphFormatError(f"{edge_path}:{lineno}: unknown node id {end!r}")
        edges.append((index[src], index[dst], etype_index.setdefault(ename, len(etype_index))))

    graph = make_graph(
        node_type,
        np.array(edges, dtype=np.int64).reshape(-1, 3),
        np.array(rows, dtype=np.float64),
        num_node_types=len(type_index),
        num_edge_types=max(len(etype_index), 1),
        node_ids=ids,
        type_names=list(type_index),
        edge_type_names=list(etype_index) or ["edge"],
    )

    labels = None
    if label_path is not None:
        class_index: dict[str, int] = {}
        mapping: dict[int, int] = {}
        for lineno, parts in _data_lines(label_path):
            if len(parts) != 2:
                raise GraphFormatError(f"{label_path}:{lineno}: expected 2 tab-separated fields, got {len(parts)}")
            nid, cname = parts
            if nid not in index:
                raise GraphFormatError(f"{label_path}:{lineno}: unknown node id {nid!r}")
            mapping[index[nid]] = class_index.setdefault(cname, len(class_index))
        labels = LabelSet(mapping, len(class_index), "node", tuple(class_index))
    return graph, labels


def save_graph(graph: HeteroGraph, node_path, edge_path, labels: LabelSet | None = None,
               label_path=None) -> None:
    ids = graph.node_ids or tuple(str(i) for i in range(graph.num_nodes))
    tnames = graph.type_names or tuple(f"t{i}" for i in range(graph.num_node_types))
    enames = graph.edge_type_names or tuple(f"r{i}" for i in range(graph.num_edge_types))
    with open(node_path, "w", encoding="utf-8") as fh:
        for i in range(graph.num_nodes):
            feats = ",".join(repr(float(x)) for x in graph.features[i])
            fh.write(f"{ids[i]}\t{tnames[graph.node_type[i]]}\t{feats}\n")
    with open(edge_path, "w", encoding="utf-8") as fh:
        for a, b, t in graph.undirected_edges().tolist():
            fh.write(f"{ids[a]}\t{ids[b]}\t{enames[t]}\n")
    if labels is not None:
        if label_path is None:
            raise ValueError("label_path required when labels are given")
        cnames = labels.class_names or tuple(f"c{i}" for i in range(labels.num_classes))
        with open(label_path, "w", encoding="utf-8") as fh:
            for inst in sorted(labels.labels):
                fh.write(f"{ids[inst]}\t{cnames[labels.labels[inst]]}\n")


def save_dataset(graph: HeteroGraph, labels: LabelSet | None, out_dir) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "node_file": os.path.join(out_dir, "nodes.tsv"),
        "edge_file": os.path.join(out_dir, "edges.tsv"),
    }
    if labels is not None:
        paths["label_file"] = os.path.join(out_dir, "labels.tsv")
    save_graph(graph, paths["node_file"], paths["edge_file"], labels, paths.get("label_file"))
    return paths


# -- synthetic data ------------------------------------------------------------

def gen_synthetic(
    num_types: int = 2,
    nodes_per_type: int = 50,
    num_classes: int = 3,
    intra_edge_prob: float = 0.1,
    inter_edge_prob: float = 0.05,
    feature_dim: int = 8,
    class_signal: float = 2.0,
    seed: int = 0,
    homophily: float = 0.0,
) -> tuple[HeteroGraph, LabelSet]:
    """Block-model heterogeneous graph whose type-0 nodes carry class labels.

    Every node gets unit Gaussian features; labeled nodes additionally get a
    class mean of norm ``class_signal``. Edges between two nodes appear
    independently with ``intra_edge_prob`` (same type) or ``inter_edge_prob``.
    Edge types index the unordered pair of endpoint types.

    With ``homophily > 0`` every node also belongs to a latent community
    (its class for labeled nodes, a random one otherwise); pairs in the same
    community get their edge probability scaled by ``1 + homophily * (C - 1)``
    and other pairs by ``1 - homophily``, which keeps the expected degree.
    ``homophily = 0`` is the plain type-level block model.
    """
    for name, p in (("intra_edge_prob", intra_edge_prob), ("inter_edge_prob", inter_edge_prob)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    if not 0.0 <= homophily <= 1.0:
        raise ValueError(f"homophily must lie in [0, 1], got {homophily}")
    for name, c in (("num_types", num_types), ("nodes_per_type", nodes_per_type),
                    ("num_classes", num_classes), ("feature_dim", feature_dim)):
        if c < 1:
            raise ValueError(f"{name} must be >= 1, got {c}")

    rng = np.random.default_rng(seed)
    n = num_types * nodes_per_type
    node_type = np.repeat(np.arange(num_types), nodes_per_type)

    classes = np.arange(nodes_per_type) % num_classes
    rng.shuffle(classes)
    if feature_dim >= num_classes:
        means = np.eye(num_classes, feature_dim)
    else:
        means = rng.standard_normal((num_classes, feature_dim))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = rng.standard_normal((n, feature_dim))
    features[:nodes_per_type] += class_signal * means[classes]

    iu, ju = np.triu_indices(n, k=1)
    same = node_type[iu] == node_type[ju]
    prob = np.where(same, intra_edge_prob, inter_edge_prob)
    if homophily > 0:
        community = np.concatenate([classes, rng.integers(0, num_classes, size=n - nodes_per_type)])
        together = community[iu] == community[ju]
        prob = prob * np.where(together, 1.0 + homophily * (num_classes - 1), 1.0 - homophily)
        prob = np.clip(prob, 0.0, 1.0)
    keep = rng.random(len(iu)) < prob
    a, b = iu[keep], ju[keep]
    ta, tb = np.minimum(node_type[a], node_type[b]), np.maximum(node_type[a], node_type[b])
    pair_ids = {}
    for x in range(num_types):
        for y in range(x, num_types):
            pair_ids[(x, y)] = len(pair_ids)
    etype = np.array([pair_ids[(x, y)] for x, y in zip(ta.tolist(), tb.tolist())], dtype=np.int64)

    graph = make_graph(
        node_type,
        np.stack([a, b, etype], axis=1) if len(a) else np.zeros((0, 3), dtype=np.int64),
        features,
        num_node_types=num_types,
        num_edge_types=len(pair_ids),
        node_ids=[f"n{i}" for i in range(n)],
        type_names=[f"type{t}" for t in range(num_types)],
        edge_type_names=[f"type{x}-type{y}" for (x, y) in pair_ids],
    )
    labels = LabelSet(
        {i: int(classes[i]) for i in range(nodes_per_type)},
        num_classes,
        "node",
        tuple(f"class{c}" for c in range(num_classes)),
    )
    return graph, labels
