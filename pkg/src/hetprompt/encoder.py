"""GCN backbone: forward pass per homogeneous view and exact weight gradients."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import HeteroGraph
from .template import HomoView

CHECKPOINT_MAGIC = b"HGPC"
CHECKPOINT_VERSION = 1


@dataclass(eq=False)
class EncoderParams:
    layers: list[np.ndarray]
    seed: int = 0
    activation: str = "relu"

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def feature_dim(self) -> int:
        return self.layers[0].shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.layers[-1].shape[1]

    def copy(self) -> "EncoderParams":
        return EncoderParams([w.copy() for w in self.layers], self.seed, self.activation)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for w in self.layers:
            h.update(np.ascontiguousarray(w, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass
class ForwardCache:
    """Per-layer state kept for the backward pass."""

    adjacency: sp.csr_matrix
    propagated: list[np.ndarray] = field(default_factory=list)  # Â H_l
    preact: list[np.ndarray] = field(default_factory=list)  # Â H_l W_l


def normalize_adjacency(view: HomoView) -> sp.csr_matrix:
    """``D^-1/2 (A + I) D^-1/2`` over the view's local indices."""
    n = view.num_nodes
    if n == 0:
        return sp.csr_matrix((0, 0))
    rows = np.concatenate([view.edges[:, 0], np.arange(n)])
    cols = np.concatenate([view.edges[:, 1], np.arange(n)])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj.data[:] = 1.0  # collapse accidental duplicates to 0/1
    inv_sqrt = 1.0 / np.sqrt(np.diff(adj.indptr).astype(np.float64))
    rows = np.repeat(np.arange(n), np.diff(adj.indptr))
    adj.data = inv_sqrt[rows] * inv_sqrt[adj.indices]
    return adj


def init_params(feature_dim: int, hidden_dim: int, num_layers: int, seed: int) -> EncoderParams:
    """Glorot-uniform weights; layer 0 maps ``feature_dim`` to ``hidden_dim``."""
    if min(feature_dim, hidden_dim, num_layers) < 1:
        raise ValueError("dimensions and layer count must be >= 1")
    rng = np.random.default_rng(seed)
    layers = []
    fan_in = feature_dim
    for _ in range(num_layers):
        bound = np.sqrt(6.0 / (fan_in + hidden_dim))
        layers.append(rng.uniform(-bound, bound, size=(fan_in, hidden_dim)))
        fan_in = hidden_dim
    return EncoderParams(layers, seed)


def forward_view(adjacency: sp.csr_matrix, features: np.ndarray,
                 params: EncoderParams) -> tuple[np.ndarray, ForwardCache]:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.feature_dim:
        raise ValueError(
            f"feature matrix of shape {features.shape} does not match encoder input dim {params.feature_dim}")
    if features.shape[0] != adjacency.shape[0]:
        raise ValueError("feature rows do not match view size")
    cache = ForwardCache(adjacency)
    h = features
    last = params.num_layers - 1
    for l, w in enumerate(params.layers):
        ah = adjacency @ h
        z = ah @ w
        cache.propagated.append(ah)
        cache.preact.append(z)
        h = z if l == last else np.maximum(z, 0.0)
    return h, cache


def encode_view(view: HomoView, features: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Node embeddings for one view; ``features`` rows align with ``view.member_nodes``."""
    h, _ = forward_view(normalize_adjacency(view), features, params)
    return h


def encode_all(views: list[HomoView], graph: HeteroGraph, params: EncoderParams,
               with_cache: bool = False, adjacency: list[sp.csr_matrix] | None = None):
    """Run the shared encoder independently on every view.

    Returns a list of embedding matrices (and caches if ``with_cache``).
    ``adjacency`` may pass precomputed normalized operators, one per view.
    """
    if adjacency is None:
        adjacency = [normalize_adjacency(view) for view in views]
    outputs, caches = [], []
    for view, adj in zip(views, adjacency):
        h, cache = forward_view(adj, graph.features[view.member_nodes], params)
        outputs.append(h)
        caches.append(cache)
    return (outputs, caches) if with_cache else outputs


def encoder_gradients(adjoint: np.ndarray, cache: ForwardCache | None,
                      params: EncoderParams) -> list[np.ndarray]:
    """Backpropagate ``dL/dH_out`` through one cached forward pass."""
    if cache is None or len(cache.preact) != params.num_layers:
        raise ValueError("backward pass needs the cache of a forward pass with these params")
    grads: list[np.ndarray] = [None] * params.num_layers  # type: ignore[list-item]
    dz = np.asarray(adjoint, dtype=np.float64)
    for l in range(params.num_layers - 1, -1, -1):
        grads[l] = cache.propagated[l].T @ dz
        if l == 0:
            break
        dh = cache.adjacency.T @ (dz @ params.layers[l].T)
        # relu'(0) taken as 0
        dz = dh * (cache.preact[l - 1] > 0.0)
    return grads


# -- checkpoints -------------------------------------------------------------

_HEADER = struct.Struct("<4sIIIIq")


def save_checkpoint(params: EncoderParams, path) -> None:
    """Versioned header followed by little-endian float64 weights, row-major."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, params.feature_dim,
                              params.hidden_dim, params.num_layers, params.seed))
        for w in params.layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path) -> EncoderParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, d, hidden, layers, seed = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an encoder checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset = _HEADER.size
    mats = []
    fan_in = d
    for _ in range(layers):
        count = fan_in * hidden
        if offset + 8 * count > len(blob):
            raise ValueError(f"{path}: truncated weights")
        mats.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
                    .reshape(fan_in, hidden).astype(np.float64))
        offset += 8 * count
        fan_in = hidden
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after weights")
    return EncoderParams(mats, seed)
