"""Prompted readout, view aggregation, cosine similarity and class prototypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .template import HomoView

NORM_EPS = 1e-12


@dataclass
class PromptPair:
    """Feature prompt (one weight per hidden unit) and heterogeneity prompt (one per view)."""

    p_feat: np.ndarray
    p_het: np.ndarray

    @classmethod
    def identity(cls, hidden_dim: int, num_views: int) -> "PromptPair":
        return cls(np.ones(hidden_dim), np.zeros(num_views))

    @property
    def num_parameters(self) -> int:
        return self.p_feat.size + self.p_het.size

    def copy(self) -> "PromptPair":
        return PromptPair(self.p_feat.copy(), self.p_het.copy())


@dataclass
class ClassPrototypes:
    classes: np.ndarray
    vectors: np.ndarray


def readout(embeddings: np.ndarray, p_feat: np.ndarray | None = None) -> np.ndarray:
    """Mean of ``p_feat * h`` over the rows; zero vector for an empty row set."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if p_feat is not None and p_feat.shape != embeddings.shape[1:]:
        raise ValueError(f"feature prompt of shape {p_feat.shape} does not match embeddings {embeddings.shape}")
    if embeddings.shape[0] == 0:
        return np.zeros(embeddings.shape[1])
    rows = embeddings if p_feat is None else embeddings * p_feat
    return rows.mean(axis=0)


def aggregate_views(readouts, p_het: np.ndarray | None = None) -> np.ndarray:
    """Sum of per-view readouts, each scaled by ``1 + p_het[i]``."""
    readouts = np.asarray(readouts, dtype=np.float64)
    if p_het is None:
        return readouts.sum(axis=0)
    if len(p_het) != len(readouts):
        raise ValueError(f"expected {len(p_het)} readouts, got {len(readouts)}")
    return ((1.0 + p_het)[:, None] * readouts).sum(axis=0)


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < NORM_EPS or nb < NORM_EPS:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def class_prototypes(embeddings: np.ndarray, labels) -> ClassPrototypes:
    """Mean support embedding per class, classes in ascending order."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    vectors = np.stack([embeddings[labels == c].mean(axis=0) for c in classes])
    return ClassPrototypes(classes, vectors)


def classify(query: np.ndarray, prototypes: ClassPrototypes) -> int:
    sims = [cosine_sim(query, p) for p in prototypes.vectors]
    # np.argmax returns the first maximum, i.e. the lowest class id on ties
    return int(prototypes.classes[int(np.argmax(sims))])


def _local_rows(view: HomoView, nodes: np.ndarray) -> np.ndarray:
    """Local row indices of the ``nodes`` that belong to ``view`` (members are sorted)."""
    if view.num_nodes == 0 or len(nodes) == 0:
        return np.zeros(0, dtype=np.int64)
    pos = np.minimum(np.searchsorted(view.member_nodes, nodes), view.num_nodes - 1)
    return pos[view.member_nodes[pos] == nodes]


def embed_instance(members, views: list[HomoView], view_embeddings: list[np.ndarray],
                   prompts: PromptPair | None = None, templated: bool = True) -> np.ndarray:
    """Embedding of the instance whose nodes are ``members``.

    Templated: read out the instance's nodes in every view and aggregate.
    Otherwise a single readout over the view-0 embeddings. ``prompts=None``
    gives the unprompted pipeline.
    """
    members = np.sort(np.asarray(members, dtype=np.int64))
    p_feat = None if prompts is None else prompts.p_feat
    if not templated:
        return readout(view_embeddings[0][_local_rows(views[0], members)], p_feat)
    outs = [readout(h[_local_rows(v, members)], p_feat) for v, h in zip(views, view_embeddings)]
    return aggregate_views(outs, None if prompts is None else prompts.p_het)


# -- batched forms used in training -----------------------------------------

def pool_matrices(views: list[HomoView], member_lists: list[np.ndarray]) -> list[sp.csr_matrix]:
    """Per view, a ``(num_instances, view_size)`` matrix averaging each instance's nodes."""
    pools = []
    for view in views:
        rows, cols, vals = [], [], []
        for i, members in enumerate(member_lists):
            local = _local_rows(view, np.asarray(members, dtype=np.int64))
            if len(local):
                rows.append(np.full(len(local), i))
                cols.append(local)
                vals.append(np.full(len(local), 1.0 / len(local)))
        if rows:
            mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(len(member_lists), view.num_nodes))
        else:
            mat = sp.csr_matrix((len(member_lists), view.num_nodes))
        pools.append(mat)
    return pools


def view_means(pools: list[sp.csr_matrix], view_embeddings: list[np.ndarray]) -> np.ndarray:
    """Unprompted per-view readouts stacked as ``(num_instances, num_views, hidden)``."""
    return np.stack([p @ h for p, h in zip(pools, view_embeddings)], axis=1)


def prompted_embeddings(means: np.ndarray, prompts: PromptPair) -> np.ndarray:
    """Instance embeddings ``p_feat * sum_i (1 + p_het[i]) r_i`` from stacked readouts.

    The feature prompt factors out of the mean readout, so this equals
    :func:`embed_instance` applied row by row.
    """
    mixed = np.einsum("nvh,v->nh", means, 1.0 + prompts.p_het)
    return mixed * prompts.p_feat


def prompted_backward(d_emb: np.ndarray, means: np.ndarray,
                      prompts: PromptPair) -> tuple[np.ndarray, np.ndarray]:
    mixed = np.einsum("nvh,v->nh", means, 1.0 + prompts.p_het)
    d_feat = (d_emb * mixed).sum(axis=0)
    d_het = np.einsum("nh,nvh->v", d_emb * prompts.p_feat, means)
    return d_feat, d_het


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between rows of ``a`` and rows of ``b``."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ia = np.where(na < NORM_EPS, 0.0, 1.0 / np.maximum(na, NORM_EPS))
    ib = np.where(nb < NORM_EPS, 0.0, 1.0 / np.maximum(nb, NORM_EPS))
    return (a * ia[:, None]) @ (b * ib[:, None]).T


def cosine_matrix_backward(a: np.ndarray, b: np.ndarray, sims: np.ndarray,
                           d_sims: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ia = np.where(na < NORM_EPS, 0.0, 1.0 / np.maximum(na, NORM_EPS))
    ib = np.where(nb < NORM_EPS, 0.0, 1.0 / np.maximum(nb, NORM_EPS))
    ua, ub = a * ia[:, None], b * ib[:, None]
    # d cos / d a = (u_b - cos * u_a) / |a|
    da = ((d_sims @ ub) - (d_sims * sims).sum(axis=1)[:, None] * ua) * ia[:, None]
    db = ((d_sims.T @ ua) - (d_sims * sims).sum(axis=0)[:, None] * ub) * ib[:, None]
    return da, db


def cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity of two equally shaped matrices."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na >= NORM_EPS) & (nb >= NORM_EPS)
    out = np.zeros(len(a))
    out[ok] = (a[ok] * b[ok]).sum(axis=1) / (na[ok] * nb[ok])
    return out


def cosine_rows_backward(a: np.ndarray, b: np.ndarray, sims: np.ndarray,
                         d_sims: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na >= NORM_EPS) & (nb >= NORM_EPS)
    da = np.zeros_like(a)
    db = np.zeros_like(b)
    g = d_sims[ok][:, None]
    s = sims[ok][:, None]
    ua = a[ok] / na[ok][:, None]
    ub = b[ok] / nb[ok][:, None]
    da[ok] = g * (ub - s * ua) / na[ok][:, None]
    db[ok] = g * (ua - s * ub) / nb[ok][:, None]
    return da, db
