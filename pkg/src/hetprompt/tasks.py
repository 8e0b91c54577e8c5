"""Few-shot episodes for NC/GC/LP, evaluation metrics and the benchmark loop."""

from __future__ import annotations

import math
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .config import RunConfig
from .embedding import PromptPair, cosine_matrix, cosine_rows, pool_matrices, prompted_embeddings, view_means
from .encoder import EncoderParams, encode_all
from .graph import HeteroGraph, LabelSet
from .objectives import class_loss_and_grad, link_loss_and_grad, prompt_tune
from .template import Subgraph, context_members, ego_networks, graph_template


@dataclass
class FewShotTask:
    """One episode.

    NC/GC: ``support`` and ``query`` hold ``(instance, class)`` pairs.
    LP: both hold ``(target, positive, negatives)`` tuples.
    """

    kind: str
    support: list
    query: list


# -- episode samplers ----------------------------------------------------------

def _sample_class_tasks(kind: str, labels: dict[int, int], k: int, num_tasks: int,
                        seed: int) -> list[FewShotTask]:
    groups: dict[int, list[int]] = {}
    for inst in sorted(labels):
        groups.setdefault(labels[inst], []).append(inst)
    for c in sorted(groups):
        if len(groups[c]) < k + 1:
            raise ValueError(f"class {c} has {len(groups[c])} labeled instances; "
                             f"{k}-shot episodes need at least {k + 1}")
    rng = np.random.default_rng(seed)
    tasks = []
    for _ in range(num_tasks):
        support, query = [], []
        for c in sorted(groups):
            members = np.array(groups[c])
            perm = rng.permutation(len(members))
            support += [(int(members[i]), c) for i in perm[:k]]
            query += [(int(members[i]), c) for i in perm[k:]]
        query.sort()
        tasks.append(FewShotTask(kind, support, query))
    return tasks


def sample_nc_tasks(labels: LabelSet, k: int = 1, num_tasks: int = 100, seed: int = 0) -> list[FewShotTask]:
    """k labeled nodes per class as support, every other labeled node as query."""
    return _sample_class_tasks("nc", labels.labels, k, num_tasks, seed)


def sample_gc_tasks(collection: list[tuple[Subgraph, int]], k: int = 1, num_tasks: int = 100,
                    seed: int = 0) -> list[FewShotTask]:
    """Same sampler over graph instances; instance ids index ``collection``."""
    labels = {i: int(c) for i, (_, c) in enumerate(collection)}
    return _sample_class_tasks("gc", labels, k, num_tasks, seed)


def split_lp_edges(graph: HeteroGraph, fraction: float, seed: int) -> np.ndarray:
    """Undirected ``(a, b)`` pairs reserved for link-prediction episodes."""
    und = graph.undirected_edges()[:, :2]
    count = int(round(fraction * len(und)))
    rng = np.random.default_rng([seed, 7])
    pick = np.sort(rng.choice(len(und), size=count, replace=False))
    return und[pick]


def _lp_tuple(target: int, positive: int, adjacency: list[set], n: int, negatives: int,
              rng: np.random.Generator):
    candidates = np.array([u for u in range(n) if u != target and u not in adjacency[target]])
    if len(candidates) < negatives:
        return None
    negs = rng.choice(candidates, size=negatives, replace=False)
    return (int(target), int(positive), tuple(int(x) for x in negs))


def sample_lp_tasks(graph: HeteroGraph, k: int = 1, num_tasks: int = 100, negatives: int = 10,
                    holdout_fraction: float = 0.2, seed: int = 0, queries_per_task: int = 10,
                    holdout: np.ndarray | None = None) -> tuple[list[FewShotTask], np.ndarray]:
    """Link-prediction episodes over held-out edges.

    The held-out edges are split in half: exemplar links for support, and
    links for query tuples of one positive and ``negatives`` non-neighbors.
    Returns the tasks and the held-out pairs, which must be hidden from
    pre-training.
    """
    if holdout is None:
        holdout = split_lp_edges(graph, holdout_fraction, seed)
    half = len(holdout) // 2
    support_pool, query_pool = holdout[:half], holdout[half:]
    if len(support_pool) < k or len(query_pool) < 1:
        raise ValueError(f"only {len(holdout)} held-out edges; increase the holdout fraction")
    n = graph.num_nodes
    adjacency = [set(x.tolist()) for x in graph.neighbors()]
    rng = np.random.default_rng([seed, 11])

    def draw(pool, count):
        out = []
        for idx in rng.choice(len(pool), size=min(count, len(pool)), replace=False):
            a, b = pool[idx]
            if rng.random() < 0.5:
                a, b = b, a
            tup = _lp_tuple(a, b, adjacency, n, negatives, rng) or _lp_tuple(b, a, adjacency, n, negatives, rng)
            if tup is None:
                raise ValueError(f"edge ({a}, {b}): fewer than {negatives} non-neighbors for either endpoint")
            out.append(tup)
        return out

    tasks = [FewShotTask("lp", draw(support_pool, k), draw(query_pool, queries_per_task))
             for _ in range(num_tasks)]
    return tasks, holdout


# -- metrics -------------------------------------------------------------------

def micro_macro_f1(predictions, truths, num_classes: int) -> tuple[float, float]:
    """Micro F1 (accuracy for single-label data) and macro F1 over ``num_classes`` classes.

    A class absent from both predictions and truths contributes F1 = 0.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if len(truths) == 0:
        raise ValueError("empty input")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (truths, predictions), 1)
    tp = np.diag(confusion)
    denom = confusion.sum(axis=0) + confusion.sum(axis=1)  # 2tp + fp + fn
    # rational arithmetic keeps the result independent of summation order
    macro = sum(Fraction(int(2 * t), int(d)) for t, d in zip(tp, denom) if d > 0) / num_classes
    return float(Fraction(int(tp.sum()), len(truths))), float(macro)


def auc_one_vs_negatives(pos_score: float, neg_scores) -> float:
    """Share of negatives scored below the positive; ties count one half."""
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if neg_scores.size == 0:
        raise ValueError("need at least one negative")
    return float(((neg_scores < pos_score).sum() + 0.5 * (neg_scores == pos_score).sum()) / neg_scores.size)


def ndcg_single_relevant(rank: int) -> float:
    """DCG of a single relevant item at 1-based ``rank`` (ideal DCG is 1)."""
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 / math.log2(rank + 1)


def ndcg_from_scores(pos_score: float, neg_scores) -> float:
    """NDCG of the positive; with ties the gain is averaged over the tied ranks."""
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    above = int((neg_scores > pos_score).sum())
    tied = int((neg_scores == pos_score).sum())
    return math.fsum(ndcg_single_relevant(r) for r in range(above + 1, above + tied + 2)) / (tied + 1)


# -- frozen instance banks -----------------------------------------------------

@dataclass
class InstanceBank:
    """Per-view unprompted readouts of frozen encoder outputs, one row per instance."""

    means: np.ndarray  # (instances, views, hidden)
    ids: np.ndarray

    def __post_init__(self):
        self._row = {int(i): r for r, i in enumerate(self.ids)}

    def rows(self, instances) -> np.ndarray:
        return np.array([self._row[int(i)] for i in instances], dtype=np.int64)

    @property
    def num_views(self) -> int:
        return self.means.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.means.shape[2]


def node_bank(graph: HeteroGraph, params: EncoderParams, delta: int, nodes=None) -> InstanceBank:
    """Context-subgraph readouts per template view; the encoder runs once per view."""
    views = graph_template(graph)
    outs = encode_all(views, graph, params)
    members = context_members(graph, delta)
    ids = np.arange(graph.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    pools = pool_matrices(views, [members[i] for i in ids])
    return InstanceBank(view_means(pools, outs), ids)


def ego_bank(graph: HeteroGraph, collection: list[tuple[Subgraph, int]], params: EncoderParams) -> InstanceBank:
    """Each ego network is encoded as a graph of its own and read out whole."""
    rows = []
    for sub, _ in collection:
        g = graph.induced(sub.member_nodes)
        views = graph_template(g)
        outs = encode_all(views, g, params)
        rows.append(np.stack([h.mean(axis=0) if len(h) else np.zeros(params.hidden_dim) for h in outs]))
    return InstanceBank(np.stack(rows), np.arange(len(collection)))


# -- episode evaluation ------------------------------------------------------

def predict_classes(bank: InstanceBank, task: FewShotTask, prompts: PromptPair) -> tuple[np.ndarray, np.ndarray]:
    """Cosine-argmax against support prototypes; returns (predictions, truths) for the query."""
    sup_ids, sup_y = zip(*task.support)
    classes = np.unique(sup_y)
    sup = prompted_embeddings(bank.means[bank.rows(sup_ids)], prompts)
    protos = np.stack([sup[np.asarray(sup_y) == c].mean(axis=0) for c in classes])
    q_ids, q_y = zip(*task.query)
    query = prompted_embeddings(bank.means[bank.rows(q_ids)], prompts)
    pred = classes[np.argmax(cosine_matrix(query, protos), axis=1)]
    return pred, np.asarray(q_y)


def score_links(bank: InstanceBank, tuples, prompts: PromptPair) -> tuple[float, float]:
    """Mean AUC and NDCG over ``(target, positive, negatives)`` tuples."""
    aucs, ndcgs = [], []
    for target, pos, negs in tuples:
        cands = [pos, *negs]
        emb = prompted_embeddings(bank.means[bank.rows([target, *cands])], prompts)
        scores = cosine_rows(np.repeat(emb[:1], len(cands), axis=0), emb[1:])
        aucs.append(auc_one_vs_negatives(scores[0], scores[1:]))
        ndcgs.append(ndcg_from_scores(scores[0], scores[1:]))
    return float(np.mean(aucs)), float(np.mean(ndcgs))


def episode_objective(bank: InstanceBank, task: FewShotTask, tau: float):
    """Loss/gradient closure over the episode's support set."""
    if task.kind == "lp":
        nodes = sorted({x for t, p, negs in task.support for x in (t, p, *negs)})
        local = {v: i for i, v in enumerate(nodes)}
        triplets = np.array([(local[t], local[p], local[b]) for t, p, negs in task.support for b in negs])
        means = bank.means[bank.rows(nodes)]
        return partial(_link_objective, means, triplets, tau)
    ids, ys = zip(*task.support)
    classes = np.unique(ys)
    dense = np.searchsorted(classes, ys)
    return partial(_class_objective, bank.means[bank.rows(ids)], dense, tau)


def _link_objective(means, triplets, tau, prompts):
    return link_loss_and_grad(means, triplets, prompts, tau)


def _class_objective(means, labels, tau, prompts):
    return class_loss_and_grad(means, labels, prompts, tau)


def evaluate_episode(bank: InstanceBank, task: FewShotTask, prompts: PromptPair,
                     num_classes: int) -> dict[str, float]:
    if task.kind == "lp":
        auc, ndcg = score_links(bank, task.query, prompts)
        return {"auc": auc, "ndcg": ndcg}
    pred, truth = predict_classes(bank, task, prompts)
    micro, macro = micro_macro_f1(pred, truth, num_classes)
    return {"micro_f1": micro, "macro_f1": macro}


# -- reports -----------------------------------------------------------------

@dataclass
class MetricReport:
    kind: str
    per_task: dict[str, list[float]]
    num_tasks: int
    selected_epochs: int
    config_hash: str
    prompt_mode: str = "dual"
    num_prompt_parameters: int = 0
    validation_curve: dict[int, float] = field(default_factory=dict)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.per_task[metric]))

    def std(self, metric: str) -> float:
        return float(np.std(self.per_task[metric]))

    def to_tsv(self) -> str:
        lines = ["metric\tmean\tstd\tnum_tasks\tconfig_hash"]
        for name in self.per_task:
            lines.append(f"{name}\t{self.mean(name):.6f}\t{self.std(name):.6f}\t{self.num_tasks}\t{self.config_hash}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [
            f"task: {self.kind}",
            f"prompt_mode: {self.prompt_mode}",
            f"tunable_parameters: {self.num_prompt_parameters}",
            f"selected_epochs: {self.selected_epochs}",
            f"num_tasks: {self.num_tasks}",
            f"config_hash: {self.config_hash}",
        ]
        for name in self.per_task:
            lines.append(f"{name}: {100 * self.mean(name):.2f} +- {100 * self.std(name):.2f}")
        return "\n".join(lines) + "\n"


# -- benchmark -----------------------------------------------------------------

def build_episodes(graph: HeteroGraph, labels: LabelSet | None, params: EncoderParams, kind: str,
                   config: RunConfig):
    """Frozen instance bank, episodes and class count for one task kind."""
    if kind == "nc":
        if labels is None:
            raise ValueError("node classification needs labels")
        tasks = sample_nc_tasks(labels, config.shots, config.num_tasks, config.seed)
        bank = node_bank(graph, params, config.delta, labels.instances())
        return bank, tasks, labels.num_classes
    if kind == "gc":
        if labels is None:
            raise ValueError("graph classification needs labels")
        collection = ego_networks(graph, labels, config.effective_ego_delta)
        tasks = sample_gc_tasks(collection, config.shots, config.num_tasks, config.seed)
        return ego_bank(graph, collection, params), tasks, labels.num_classes
    if kind == "lp":
        if config.lp_holdout_fraction <= 0:
            raise ValueError("link prediction needs lp_holdout_fraction > 0")
        tasks, holdout = sample_lp_tasks(graph, config.shots, config.num_tasks, config.lp_negatives,
                                         config.lp_holdout_fraction, config.seed, config.lp_queries)
        bank = node_bank(graph.without_edges(holdout), params, config.delta)
        return bank, tasks, 0
    raise ValueError(f"unknown task kind {kind!r}")


def _tune_and_score(bank, task, config, epochs, snapshot_epochs, num_classes, params, prompt_mode):
    result = prompt_tune(episode_objective(bank, task, config.tau), bank.hidden_dim, bank.num_views,
                         config, epochs=epochs, snapshot_epochs=snapshot_epochs, encoder=params,
                         prompt_mode=prompt_mode)
    if snapshot_epochs:
        return {e: evaluate_episode(bank, task, p, num_classes) for e, p in result.snapshots.items()}
    return evaluate_episode(bank, task, result.prompts, num_classes)


def run_benchmark(graph: HeteroGraph, labels: LabelSet | None, params: EncoderParams, kind: str,
                  config: RunConfig, prompt_mode: str | None = None, episodes=None) -> MetricReport:
    """Tune prompts per episode, predict the query set and aggregate metrics.

    The first ``val_fraction`` of episodes only choose the number of tuning
    epochs (from multiples of ``eval_every``); metrics are reported on the rest.
    ``episodes`` may pass a prebuilt ``(bank, tasks, num_classes)``.
    """
    mode = prompt_mode or config.prompt_mode
    bank, tasks, num_classes = episodes or build_episodes(graph, labels, params, kind, config)
    n_val = int(round(config.val_fraction * len(tasks)))
    val_tasks, test_tasks = tasks[:n_val], tasks[n_val:]
    key = "auc" if kind == "lp" else "micro_f1"
    frozen = params.checksum()

    run = partial(_tune_and_score, bank, config=config, num_classes=num_classes, params=params,
                  prompt_mode=mode)
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        selected = config.epochs_tune
        curve: dict[int, float] = {}
        if mode == "identity" or config.epochs_tune == 0:
            selected = 0
        elif val_tasks:
            candidates = sorted({*range(config.eval_every, config.epochs_tune + 1, config.eval_every),
                                 config.epochs_tune})
            scored = list(pool.map(partial(run, epochs=config.epochs_tune, snapshot_epochs=candidates),
                                   val_tasks))
            curve = {e: float(np.mean([s[e][key] for s in scored])) for e in candidates}
            selected = max(candidates, key=lambda e: (curve[e], -e))
        results = list(pool.map(partial(run, epochs=selected, snapshot_epochs=()), test_tasks))

    if params.checksum() != frozen:
        raise RuntimeError("encoder weights changed during the benchmark")
    per_task = {name: [r[name] for r in results] for name in results[0]} if results else {}
    return MetricReport(kind, per_task, len(test_tasks), selected, config.digest(), mode,
                        bank.hidden_dim + bank.num_views, curve)
