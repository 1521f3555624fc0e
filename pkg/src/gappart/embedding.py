"""Node embedding modules: a 3-layer GCN and max-pool GraphSAGE.

Parameters live in plain ``{name: array}`` dicts so the model can hand them to
a tape as trainable tensors or pass them through as frozen constants. Every
forward function accepts either.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import Graph
from .optim import xavier_init


@dataclass(frozen=True)
class GcnParams:
    """Shape description of a GCN: ``W0: d x h`` then ``layers - 1`` of ``h x h``."""

    in_dim: int
    hidden: int
    layers: int = 3
    trainable: bool = True

    def names(self):
        return [f"gcn.W{i}" for i in range(self.layers)]

    def init(self, seed) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        out = {}
        for i, name in enumerate(self.names()):
            rows = self.in_dim if i == 0 else self.hidden
            out[name] = xavier_init(rows, self.hidden, rng.integers(2**63))
        return out

    @property
    def out_dim(self):
        return self.hidden


def gcn_forward(g: Graph, x, params, spec: GcnParams):
    """``tanh(Â ... tanh(Â tanh(Â X W0) W1) ... W_{L-1})``.

    Each propagation is computed as ``Â (H W)``, the cheaper association when
    the feature width exceeds the hidden width.
    """
    a_hat = g.gcn_adjacency
    h = ad.as_tensor(x)
    if h.shape[1] != spec.in_dim:
        raise ValueError(f"GCN expects {spec.in_dim} input features, got {h.shape[1]}")
    for name in spec.names():
        h = ad.tanh(ad.sparse_dense_matmul(a_hat, ad.matmul(h, params[name])))
    return h


def sample_neighbors(g: Graph, node: int, size, seed, epoch: int = 0) -> np.ndarray:
    """Uniform sample without replacement of ``min(size, |N(node)|)`` neighbors.

    ``size`` of ``None`` or ``"all"`` returns the whole neighborhood. The draw
    depends only on ``(seed, epoch, node)``.
    """
    nbrs = g.neighbors(node)
    if size is None or size == "all" or nbrs.size <= int(size):
        return np.array(nbrs)
    rng = np.random.default_rng([int(seed), int(epoch), int(node)])
    pick = rng.choice(nbrs.size, size=int(size), replace=False)
    return np.sort(nbrs[pick])


def sampled_neighbor_csr(g: Graph, size, seed, epoch: int = 0):
    if size is None or size == "all":
        return g.neighbor_csr
    indptr, indices = g.neighbor_csr
    if np.all(np.diff(indptr) <= int(size)):
        return indptr, indices
    parts = [sample_neighbors(g, i, size, seed, epoch) for i in range(g.n)]
    counts = np.array([p.size for p in parts], dtype=np.int64)
    new_ptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(counts, out=new_ptr[1:])
    new_idx = np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, dtype=np.int64)
    return new_ptr, new_idx


@dataclass(frozen=True)
class SageParams:
    """Shape description of a K-step max-pool GraphSAGE.

    Step ``k`` maps the previous representation (width ``d`` for k = 1, else
    ``hidden``) through an aggregation layer of width ``hidden``, max-pools over
    neighbors, concatenates with the node's own representation, and projects to
    ``hidden``. With ``shared_pooling`` every step whose input width equals
    ``hidden`` uses one common aggregation pair. ``projection_bias="agg"`` adds
    the aggregation bias after the projection (the update as usually printed
    for this model); ``"proj"`` gives the projection its own bias.
    """

    in_dim: int
    hidden: int
    steps: int = 2
    shared_pooling: bool = False
    sample_size: int | None = None
    projection_bias: str = "agg"
    trainable: bool = True

    def __post_init__(self):
        if self.projection_bias not in ("agg", "proj"):
            raise ValueError("projection_bias must be 'agg' or 'proj'")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")

    def _step_in(self, k):
        return self.in_dim if k == 1 else self.hidden

    def agg_name(self, k):
        if self.shared_pooling and self._step_in(k) == self.hidden:
            return "sage.agg"
        return f"sage.agg{k}"

    def names(self):
        out = []
        for k in range(1, self.steps + 1):
            a = self.agg_name(k)
            for nm in (f"{a}.W", f"{a}.b"):
                if nm not in out:
                    out.append(nm)
            out.append(f"sage.proj{k}.W")
            if self.projection_bias == "proj":
                out.append(f"sage.proj{k}.b")
        return out

    def init(self, seed) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        out = {}
        for k in range(1, self.steps + 1):
            d_in = self._step_in(k)
            a = self.agg_name(k)
            if f"{a}.W" not in out:
                out[f"{a}.W"] = xavier_init(d_in, self.hidden, rng.integers(2**63))
                out[f"{a}.b"] = np.zeros((1, self.hidden))
            out[f"sage.proj{k}.W"] = xavier_init(d_in + self.hidden, self.hidden, rng.integers(2**63))
            if self.projection_bias == "proj":
                out[f"sage.proj{k}.b"] = np.zeros((1, self.hidden))
        return out

    @property
    def out_dim(self):
        return self.hidden if self.steps else self.in_dim


def sage_forward(g: Graph, x, params, spec: SageParams, seed=0, epoch: int = 0, sample=True):
    """K rounds of: max-pool neighbor messages, concat with self, project, L2-normalize.

    ``sample=False`` forces full neighborhoods regardless of ``spec.sample_size``.
    A node with no (sampled) neighbors pools a zero vector.
    """
    h = ad.as_tensor(x)
    if h.shape[1] != spec.in_dim:
        raise ValueError(f"GraphSAGE expects {spec.in_dim} input features, got {h.shape[1]}")
    size = spec.sample_size if sample else None
    for k in range(1, spec.steps + 1):
        indptr, indices = sampled_neighbor_csr(g, size, seed, epoch * 1000 + k)
        a = spec.agg_name(k)
        msg = ad.matmul(h, params[f"{a}.W"]) + params[f"{a}.b"]
        pooled = ad.row_maxpool_over_sets(msg, indptr, indices)
        both = ad.concat_cols([h, pooled])
        bias = params[f"{a}.b"] if spec.projection_bias == "agg" else params[f"sage.proj{k}.b"]
        h = ad.relu(ad.matmul(both, params[f"sage.proj{k}.W"]) + bias)
        h = ad.l2_normalize_rows(h)
    return h
