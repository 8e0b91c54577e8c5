"""Link-prediction pre-training, prompt tuning, their gradients and the optimizer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import RunConfig
from .embedding import (
    PromptPair,
    cosine_matrix,
    cosine_matrix_backward,
    cosine_rows,
    cosine_rows_backward,
    pool_matrices,
    prompted_backward,
    prompted_embeddings,
    view_means,
)
from .encoder import EncoderParams, encode_all, encoder_gradients, init_params, normalize_adjacency
from .graph import HeteroGraph, disjoint_union
from .template import context_members, graph_template

log = logging.getLogger(__name__)


class NumericalError(ArithmeticError):
    """Raised when a loss or gradient becomes non-finite."""


class Triplet(NamedTuple):
    v: int
    a: int
    b: int


# -- triplets ----------------------------------------------------------------

def _pair_keys(pairs: np.ndarray, n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.minimum(pairs[:, 0], pairs[:, 1]) * n + np.maximum(pairs[:, 0], pairs[:, 1])


def sample_triplets(graph: HeteroGraph, count: int, negatives_per_positive: int = 1,
                    seed: int = 0, holdout=None) -> np.ndarray:
    """Draw ``count`` positive edges and pair each with non-neighbor negatives.

    Returns an ``(count * negatives_per_positive, 3)`` array of ``(v, a, b)``
    rows with ``(v, a)`` an edge outside ``holdout`` and ``b`` not adjacent to
    ``v`` in ``graph``.
    """
    n = graph.num_nodes
    neighbors = graph.neighbors()
    degree = np.array([len(x) for x in neighbors])
    if np.all(degree >= n - 1):
        raise ValueError("no negative available: the graph is complete")
    edges = graph.edges[:, :2]
    if holdout is not None and len(holdout):
        edges = edges[~np.isin(_pair_keys(edges, n), _pair_keys(holdout, n))]
    edges = edges[degree[edges[:, 0]] < n - 1]
    if len(edges) == 0:
        raise ValueError("no positive edge with an available negative")

    rng = np.random.default_rng(seed)
    adjacency = [set(x.tolist()) for x in neighbors]
    rows = []
    picks = rng.integers(0, len(edges), size=count)
    for v, a in edges[picks].tolist():
        for _ in range(negatives_per_positive):
            while True:
                b = int(rng.integers(0, n))
                if b != v and b not in adjacency[v]:
                    break
            rows.append((v, a, b))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


# -- losses --------------------------------------------------------------------

def pretrain_loss(sim_pos, sim_neg, tau: float = 1.0) -> float:
    """Sum over triplets of ``-ln softmax`` of the positive among {positive, negative}."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    gap = (np.asarray(sim_neg, dtype=np.float64) - np.asarray(sim_pos, dtype=np.float64)) / tau
    return float(np.logaddexp(0.0, gap).sum())


def pretrain_loss_grad(sim_pos, sim_neg, tau: float = 1.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and its derivatives with respect to positive and negative similarities."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    gap = (np.asarray(sim_neg, dtype=np.float64) - np.asarray(sim_pos, dtype=np.float64)) / tau
    weight = 0.5 * (1.0 + np.tanh(0.5 * gap)) / tau  # sigmoid(gap) / tau
    return float(np.logaddexp(0.0, gap).sum()), -weight, weight


def tune_loss(sims, targets, tau: float = 1.0) -> float:
    """Sum over rows of the softmax cross-entropy of ``sims / tau`` at ``targets``."""
    return tune_loss_grad(sims, targets, tau)[0]


def tune_loss_grad(sims, targets, tau: float = 1.0) -> tuple[float, np.ndarray]:
    if tau <= 0:
        raise ValueError("tau must be positive")
    sims = np.atleast_2d(np.asarray(sims, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size and (targets.min() < 0 or targets.max() >= sims.shape[1]):
        raise ValueError("label outside the prototype set")
    logits = sims / tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(targets))
    loss = float((logz - shifted[rows, targets]).sum())
    probs = np.exp(shifted - logz[:, None])
    probs[rows, targets] -= 1.0
    return loss, probs / tau


# -- optimizer ---------------------------------------------------------------

@dataclass
class OptimState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: OptimState) -> None:
    """In-place bias-corrected Adam update of every array in ``params``."""
    if len(params) != len(grads):
        raise ValueError("parameter and gradient lists differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: parameter {p.shape}, gradient {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# -- pre-training ------------------------------------------------------------

class PretrainObjective:
    """Triplet loss over context-subgraph embeddings of one graph.

    ``templated=False`` encodes only the full topology (types ignored);
    ``templated=True`` encodes every template view and sums the readouts.
    """

    def __init__(self, graph: HeteroGraph, delta: int, tau: float, templated: bool):
        self.graph = graph
        self.tau = tau
        self.templated = templated
        views = graph_template(graph)
        self.views = views if templated else views[:1]
        self.pools = pool_matrices(self.views, context_members(graph, delta))
        self.adjacency = [normalize_adjacency(v) for v in self.views]

    def instance_embeddings(self, params: EncoderParams, nodes: np.ndarray) -> np.ndarray:
        outs = encode_all(self.views, self.graph, params, adjacency=self.adjacency)
        return view_means([p[nodes] for p in self.pools], outs).sum(axis=1)

    def loss(self, params: EncoderParams, triplets: np.ndarray) -> float:
        return self.loss_and_grad(params, triplets, need_grad=False)[0]

    def loss_and_grad(self, params: EncoderParams, triplets: np.ndarray, need_grad: bool = True):
        triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
        nodes, inverse = np.unique(triplets, return_inverse=True)
        inverse = inverse.reshape(-1, 3)
        outs, caches = encode_all(self.views, self.graph, params, with_cache=True,
                                  adjacency=self.adjacency)
        pools = [p[nodes] for p in self.pools]
        emb = view_means(pools, outs).sum(axis=1)
        ev, ea, eb = emb[inverse[:, 0]], emb[inverse[:, 1]], emb[inverse[:, 2]]
        sp_, sn_ = cosine_rows(ev, ea), cosine_rows(ev, eb)
        loss, d_sp, d_sn = pretrain_loss_grad(sp_, sn_, self.tau)
        if not need_grad:
            return loss, None, (sp_, sn_)
        dv1, da = cosine_rows_backward(ev, ea, sp_, d_sp)
        dv2, db = cosine_rows_backward(ev, eb, sn_, d_sn)
        d_emb = np.zeros_like(emb)
        np.add.at(d_emb, inverse[:, 0], dv1 + dv2)
        np.add.at(d_emb, inverse[:, 1], da)
        np.add.at(d_emb, inverse[:, 2], db)
        grads = [np.zeros_like(w) for w in params.layers]
        for pool, cache in zip(pools, caches):
            for acc, g in zip(grads, encoder_gradients(pool.T @ d_emb, cache, params)):
                acc += g
        return loss, grads, (sp_, sn_)

    def ranking_accuracy(self, params: EncoderParams, triplets: np.ndarray) -> float:
        _, _, (sp_, sn_) = self.loss_and_grad(params, triplets, need_grad=False)
        return float(np.mean(sp_ > sn_))


@dataclass
class PretrainResult:
    params: EncoderParams
    initial: EncoderParams
    history: list[tuple[int, float, float]]  # (epoch, mean train loss, mean val loss)
    best_epoch: int
    train_triplets: np.ndarray
    val_triplets: np.ndarray
    objective: PretrainObjective


def pretrain(graph, mode: str = "plain", config: RunConfig | None = None, holdout=None,
             callback=None) -> PretrainResult:
    """Pre-train the encoder on triplets and keep the best-validation weights.

    ``graph`` may be a single graph or a list sharing one type vocabulary.
    ``holdout`` edges are removed from the topology and never used as positives.
    """
    config = config or RunConfig()
    if mode not in ("plain", "templated"):
        raise ValueError(f"unknown pre-training mode {mode!r}")
    if isinstance(graph, (list, tuple)):
        graph = disjoint_union(graph)
    if mode == "templated" and graph.is_homogeneous:
        log.warning("templated pre-training on a homogeneous graph duplicates the single view")

    topo = graph.without_edges(holdout) if holdout is not None and len(holdout) else graph
    objective = PretrainObjective(topo, config.delta, config.tau, templated=(mode == "templated"))
    params = init_params(graph.feature_dim, config.hidden_dim, config.num_layers, config.seed)
    initial = params.copy()

    triplets = sample_triplets(graph, config.num_triplets, config.negatives_per_positive,
                               seed=config.seed + 1, holdout=holdout)
    rng = np.random.default_rng(config.seed + 2)
    order = rng.permutation(len(triplets))
    n_val = max(1, int(round(config.pretrain_val_fraction * len(triplets))))
    val, train = triplets[order[:n_val]], triplets[order[n_val:]]

    def evaluate(p):
        tr = objective.loss(p, train) / len(train)
        va = objective.loss(p, val) / len(val)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise NumericalError(f"non-finite pre-training loss ({tr}, {va})")
        return tr, va

    tr, va = evaluate(params)
    history = [(0, tr, va)]
    best, best_val, best_epoch = params.copy(), va, 0
    if callback:
        callback(0, tr, va)
    state = OptimState(lr=config.lr_pretrain)
    batch = config.batch_size if config.batch_size > 0 else len(train)
    for epoch in range(1, config.epochs_pretrain + 1):
        perm = rng.permutation(len(train))
        for start in range(0, len(train), batch):
            _, grads, _ = objective.loss_and_grad(params, train[perm[start:start + batch]])
            adam_step(params.layers, grads, state)
        tr, va = evaluate(params)
        history.append((epoch, tr, va))
        if callback:
            callback(epoch, tr, va)
        if va < best_val:
            best, best_val, best_epoch = params.copy(), va, epoch
    log.info("pre-training done: best epoch %d, val loss %.4f", best_epoch, best_val)
    return PretrainResult(best, initial, history, best_epoch, train, val, objective)


# -- prompt tuning -----------------------------------------------------------

TUNABLE = {"dual": (True, True), "feat": (True, False), "het": (False, True), "identity": (False, False)}


def class_loss_and_grad(means: np.ndarray, labels: np.ndarray, prompts: PromptPair,
                        tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Prototype loss on a labeled set whose prototypes come from the same set.

    ``labels`` must be dense class indices ``0..C-1``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(labels.max()) + 1
    emb = prompted_embeddings(means, prompts)
    onehot = np.zeros((num_classes, len(labels)))
    onehot[labels, np.arange(len(labels))] = 1.0
    counts = onehot.sum(axis=1, keepdims=True)
    if np.any(counts == 0):
        raise ValueError("every class needs at least one support instance")
    avg = onehot / counts
    protos = avg @ emb
    sims = cosine_matrix(emb, protos)
    loss, d_sims = tune_loss_grad(sims, labels, tau)
    d_emb, d_protos = cosine_matrix_backward(emb, protos, sims, d_sims)
    d_emb += avg.T @ d_protos
    d_feat, d_het = prompted_backward(d_emb, means, prompts)
    return loss, d_feat, d_het


def link_loss_and_grad(means: np.ndarray, triplets: np.ndarray, prompts: PromptPair,
                       tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Triplet loss where ``triplets`` index rows of ``means``."""
    emb = prompted_embeddings(means, prompts)
    ev, ea, eb = emb[triplets[:, 0]], emb[triplets[:, 1]], emb[triplets[:, 2]]
    sp_, sn_ = cosine_rows(ev, ea), cosine_rows(ev, eb)
    loss, d_sp, d_sn = pretrain_loss_grad(sp_, sn_, tau)
    dv1, da = cosine_rows_backward(ev, ea, sp_, d_sp)
    dv2, db = cosine_rows_backward(ev, eb, sn_, d_sn)
    d_emb = np.zeros_like(emb)
    np.add.at(d_emb, triplets[:, 0], dv1 + dv2)
    np.add.at(d_emb, triplets[:, 1], da)
    np.add.at(d_emb, triplets[:, 2], db)
    d_feat, d_het = prompted_backward(d_emb, means, prompts)
    return loss, d_feat, d_het


@dataclass
class TuneResult:
    prompts: PromptPair
    losses: list[float]
    snapshots: dict[int, PromptPair]


def prompt_tune(objective, hidden_dim: int, num_views: int, config: RunConfig,
                epochs: int | None = None, snapshot_epochs=(), encoder: EncoderParams | None = None,
                prompt_mode: str | None = None) -> TuneResult:
    """Tune the prompt pair from the identity start with Adam.

    ``objective(prompts)`` returns ``(loss, d_feat, d_het)`` computed from
    frozen encoder outputs. When ``encoder`` is given its checksum is checked
    before and after tuning.
    """
    epochs = config.epochs_tune if epochs is None else epochs
    mode = prompt_mode or config.prompt_mode
    tune_feat, tune_het = TUNABLE[mode]
    frozen = encoder.checksum() if encoder is not None else None

    prompts = PromptPair.identity(hidden_dim, num_views)
    state = OptimState(lr=config.lr_tune)
    snapshots = {0: prompts.copy()} if 0 in snapshot_epochs else {}
    losses = []
    wanted = set(snapshot_epochs)
    if tune_feat or tune_het:
        for epoch in range(1, epochs + 1):
            loss, d_feat, d_het = objective(prompts)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite tuning loss at epoch {epoch}")
            losses.append(loss)
            if not tune_feat:
                d_feat = np.zeros_like(d_feat)
            if not tune_het:
                d_het = np.zeros_like(d_het)
            adam_step([prompts.p_feat, prompts.p_het], [d_feat, d_het], state)
            if epoch in wanted:
                snapshots[epoch] = prompts.copy()
    for e in wanted - set(snapshots):
        snapshots[e] = prompts.copy()

    if frozen is not None and encoder.checksum() != frozen:
        raise RuntimeError("encoder weights changed during prompt tuning")
    return TuneResult(prompts, losses, snapshots)
