"""Undirected weighted graphs and the structural quantities derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised when a graph violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class Graph:
    """An immutable undirected graph on nodes ``0..n-1``.

    Edges are stored once each, canonically ordered with ``u < v``. Self-loops
    are not representable; the GCN self-connection lives only inside
    :func:`normalized_adjacency`.
    """

    num_nodes: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    node_features: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_edges(cls, num_nodes, edges, node_features=None, feature_names=None,
                   on_duplicate="error", meta=None):
        """Build a validated graph from ``(u, v)`` or ``(u, v, w)`` tuples.

        ``on_duplicate`` decides what happens when the same undirected pair
        shows up twice: ``"error"``, ``"first"`` (keep the first weight) or
        ``"ignore_same"`` (accept repeats with identical weight only).
        """
        n = int(num_nodes)
        if n < 0:
            raise GraphError("num_nodes must be non-negative")
        edges = list(edges)
        if edges:
            arr = np.array([(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges],
                           dtype=np.float64)
            a, b, w = arr[:, 0], arr[:, 1], arr[:, 2]
            if np.any(a != np.floor(a)) or np.any(b != np.floor(b)):
                raise GraphError("node ids must be integers")
            a = a.astype(np.int64)
            b = b.astype(np.int64)
        else:
            a = b = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        return cls.from_arrays(n, a, b, w, node_features=node_features,
                               feature_names=feature_names, on_duplicate=on_duplicate,
                               meta=meta)

    @classmethod
    def from_arrays(cls, num_nodes, a, b, w=None, node_features=None, feature_names=None,
                    on_duplicate="error", meta=None):
        n = int(num_nodes)
        a = np.asarray(a, dtype=np.int64).ravel()
        b = np.asarray(b, dtype=np.int64).ravel()
        w = np.ones(a.shape[0]) if w is None else np.asarray(w, dtype=np.float64).ravel()
        if not (a.shape == b.shape == w.shape):
            raise GraphError("edge arrays differ in length")
        if a.size:
            bad = (a < 0) | (a >= n) | (b < 0) | (b >= n)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise GraphError(f"edge ({a[i]}, {b[i]}) has an endpoint outside 0..{n - 1}")
            loops = a == b
            if loops.any():
                i = int(np.flatnonzero(loops)[0])
                raise GraphError(f"self-loop on node {a[i]} is not allowed")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise GraphError("edge weights must be finite and > 0")
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if lo.size > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if dup.any():
                if on_duplicate == "error":
                    i = int(np.flatnonzero(dup)[0])
                    raise GraphError(f"duplicate edge ({lo[i]}, {hi[i]})")
                if on_duplicate == "ignore_same":
                    idx = np.flatnonzero(dup)
                    if np.any(w[idx] != w[idx + 1]):
                        i = int(idx[np.flatnonzero(w[idx] != w[idx + 1])[0]])
                        raise GraphError(f"edge ({lo[i]}, {hi[i]}) repeated with a different weight")
                keep = np.concatenate([[True], ~dup])
                # lexsort is stable, so the first listed copy survives
                lo, hi, w = lo[keep], hi[keep], w[keep]
        x = None
        if node_features is not None:
            x = np.array(node_features, dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != n:
                raise GraphError(f"node_features must have shape ({n}, d), got {x.shape}")
            x.setflags(write=False)
        names = tuple(feature_names) if feature_names is not None else None
        if names is not None and (x is None or len(names) != x.shape[1]):
            raise GraphError("feature_names must match the node feature width")
        for arr in (lo, hi, w):
            arr.setflags(write=False)
        return cls(n, lo, hi, w, x, names, dict(meta or {}))

    # -- basic accessors -------------------------------------------------

    @property
    def n(self) -> int:
        return self.num_nodes

    @property
    def num_edges(self) -> int:
        return int(self.u.shape[0])

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.u, self.v, self.w)]

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    @property
    def is_weighted(self) -> bool:
        return bool(np.any(self.w != 1.0))

    def with_features(self, x, names=None) -> Graph:
        return Graph.from_arrays(self.num_nodes, self.u, self.v, self.w, node_features=x,
                                 feature_names=names, meta=self.meta)

    def relabel(self, perm) -> Graph:
        """Return the graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        x = None
        if self.node_features is not None:
            x = np.empty_like(self.node_features)
            x[perm] = self.node_features
        return Graph.from_arrays(self.num_nodes, perm[self.u], perm[self.v], self.w,
                                 node_features=x, feature_names=self.feature_names)

    # -- derived structure (cached) ----------------------------------------

    @cached_property
    def directed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Both orientations of every edge, sorted by (source, target)."""
        src = np.concatenate([self.u, self.v])
        dst = np.concatenate([self.v, self.u])
        w = np.concatenate([self.w, self.w])
        order = np.lexsort((dst, src))
        out = (np.ascontiguousarray(src[order]), np.ascontiguousarray(dst[order]),
               np.ascontiguousarray(w[order]))
        for arr in out:
            arr.setflags(write=False)
        return out

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        src, dst, w = self.directed
        return sp.csr_matrix((w, (src, dst)), shape=(self.n, self.n))

    @cached_property
    def neighbor_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` listing N(i) in ascending order."""
        src, dst, _ = self.directed
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst.astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self.neighbor_csr
        return indices[indptr[i]:indptr[i + 1]]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.bincount(self.u, weights=self.w, minlength=self.n)
        d += np.bincount(self.v, weights=self.w, minlength=self.n)
        d.setflags(write=False)
        return d

    @cached_property
    def gcn_adjacency(self) -> sp.csr_matrix:
        return normalized_adjacency(self)

    def induced_subgraph(self, nodes) -> Graph:
        """Subgraph on ``nodes`` (relabelled 0..k-1 in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[nodes] = np.arange(nodes.size)
        keep = (pos[self.u] >= 0) & (pos[self.v] >= 0)
        x = None if self.node_features is None else self.node_features[nodes]
        return Graph.from_arrays(nodes.size, pos[self.u[keep]], pos[self.v[keep]], self.w[keep],
                                 node_features=x, feature_names=self.feature_names)

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.u, self.v] = self.w
        a[self.v, self.u] = self.w
        return a

    def connected_components(self) -> np.ndarray:
        from scipy.sparse.csgraph import connected_components

        return connected_components(self.adjacency, directed=False)[1]

    def __repr__(self) -> str:
        feats = "" if self.node_features is None else f", d={self.node_features.shape[1]}"
        return f"Graph(n={self.n}, m={self.num_edges}{feats})"


def degree_vector(g: Graph) -> np.ndarray:
    """Weighted degree of every node."""
    return np.array(g.degrees)


def laplacian(g: Graph) -> sp.csr_matrix:
    """Unnormalized Laplacian ``diag(D) - A``."""
    return (sp.diags(g.degrees) - g.adjacency).tocsr()


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """Symmetric GCN propagation matrix ``D~^-1/2 (A + I) D~^-1/2``.

    Row ``i`` has nonzeros exactly at ``N(i) | {i}``; isolated nodes get a
    lone diagonal 1.
    """
    src, dst, w = g.directed
    n = g.n
    rows = np.concatenate([src, np.arange(n)])
    cols = np.concatenate([dst, np.arange(n)])
    vals = np.concatenate([w, np.ones(n)])
    dt = np.asarray(g.degrees) + 1.0
    inv_sqrt = 1.0 / np.sqrt(dt)
    # scale product first: exact symmetry regardless of weight rounding
    vals = vals * (inv_sqrt[rows] * inv_sqrt[cols])
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    m.sort_indices()
    return m


# -- synthetic generators ------------------------------------------------------

def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p): every unordered pair is an edge independently with probability p."""
    if n < 0:
        raise GraphError("n must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    us, vs = [], []
    # one uniform draw per pair, row by row, so memory stays O(n)
    for i in range(n - 1):
        hit = np.flatnonzero(rng.random(n - i - 1) < p)
        if hit.size:
            us.append(np.full(hit.size, i, dtype=np.int64))
            vs.append(hit + (i + 1))
    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    return Graph.from_arrays(n, u, v, meta={"kind": "er", "n": n, "p": p, "seed": seed})


def generate_scale_free(n: int, seed: int, attach_m: int = 2) -> Graph:
    """Undirected preferential attachment.

    Starts from a clique on ``attach_m + 1`` nodes; each later node links to
    ``attach_m`` distinct earlier nodes drawn proportionally to degree.
    """
    if attach_m < 1 or n <= attach_m:
        raise GraphError(f"need n > attach_m >= 1, got n={n}, attach_m={attach_m}")
    rng = np.random.default_rng(seed)
    core = attach_m + 1
    us, vs = [], []
    # each node appears in `stubs` once per incident edge endpoint
    stubs: list[int] = []
    for i in range(core):
        for j in range(i + 1, core):
            us.append(i)
            vs.append(j)
            stubs.extend((i, j))
    for new in range(core, n):
        chosen: list[int] = []
        while len(chosen) < attach_m:
            t = stubs[int(rng.integers(len(stubs)))]
            if t not in chosen:
                chosen.append(t)
        for t in chosen:
            us.append(t)
            vs.append(new)
            stubs.extend((t, new))
    return Graph.from_arrays(n, us, vs,
                             meta={"kind": "scalefree", "n": n, "attach_m": attach_m, "seed": seed})


def generate_clique_chain(sizes) -> Graph:
    """Cliques of the given sizes joined in a path by single bridge edges.

    The bridge from clique k to clique k+1 links the last node of k to the
    first node of k+1.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or min(sizes) < 1:
        raise GraphError("clique sizes must be >= 1")
    us, vs, starts = [], [], []
    start = 0
    for s in sizes:
        starts.append(start)
        iu, iv = np.triu_indices(s, k=1)
        us.append(iu + start)
        vs.append(iv + start)
        start += s
    bu = [starts[k] + sizes[k] - 1 for k in range(len(sizes) - 1)]
    bv = [starts[k + 1] for k in range(len(sizes) - 1)]
    u = np.concatenate(us + [np.array(bu, dtype=np.int64)])
    v = np.concatenate(vs + [np.array(bv, dtype=np.int64)])
    return Graph.from_arrays(start, u, v, meta={"kind": "clique_chain", "sizes": sizes})


def generate_featured_blocks(sizes, p_in, p_out, op_types, dominant, purity=0.8, seed=0) -> Graph:
    """Stochastic block graph whose nodes carry one-hot op-type features.

    Block ``b`` has ``sizes[b]`` nodes and internal edge probability
    ``p_in[b]``; pairs in different blocks connect with probability ``p_out``.
    A node's op type is ``dominant[b]`` with probability ``purity`` and
    otherwise uniform over ``op_types``. Columns follow ``op_types`` order.
    """
    sizes = [int(s) for s in sizes]
    p_in = [float(p) for p in np.broadcast_to(p_in, (len(sizes),))]
    if len(dominant) != len(sizes):
        raise GraphError("need one dominant op type per block")
    for p in (*p_in, p_out, purity):
        if not 0.0 <= p <= 1.0:
            raise GraphError(f"probabilities must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = block.size
    us, vs = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        prob = np.where(block[j] == block[i], p_in[block[i]], p_out)
        hit = j[rng.random(j.size) < prob]
        us.append(np.full(hit.size, i, dtype=np.int64))
        vs.append(hit)
    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    col = {t: k for k, t in enumerate(op_types)}
    ops = []
    for b in block:
        ops.append(dominant[b] if rng.random() < purity else op_types[rng.integers(len(op_types))])
    x = np.zeros((n, len(op_types)))
    x[np.arange(n), [col[t] for t in ops]] = 1.0
    meta = {"kind": "featured_blocks", "sizes": sizes, "p_in": p_in, "p_out": p_out,
            "seed": seed, "op_types": ops, "block": block.tolist()}
    return Graph.from_arrays(n, u, v, node_features=x, feature_names=op_types, meta=meta)
