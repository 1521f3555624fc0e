"""Expected normalized cut, balance error, and their exact discrete counterparts.

Direction convention: the expected cut sums ``A_ij Y_ik (1 - Y_jk)`` over the
full symmetric adjacency. For a one-hot ``Y`` only the orientation leaving
``S_k`` survives, so ``expected_cut(.., k)`` equals :func:`exact_cut` for that
partition, and :func:`total_expected_cut` (the sum over k) is twice the
undirected total cut :func:`total_cut`. The normalized cut needs no
correction because each partition's cut is divided by its own volume.

Every differentiable function takes ``path="sparse"`` (edge loop, O(|E| g))
or ``path="dense"`` (materialized n x n products, the reference).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .graph import Graph

EPS_VOL = 1e-10


def one_hot(assignment, g_parts: int) -> np.ndarray:
    a = np.asarray(assignment, dtype=np.int64)
    if a.size and (a.min() < 0 or a.max() >= g_parts):
        raise ValueError(f"partition ids must lie in 0..{g_parts - 1}")
    y = np.zeros((a.size, g_parts))
    y[np.arange(a.size), a] = 1.0
    return y


def hard_assignment(y) -> np.ndarray:
    """Row argmax; ties go to the lowest partition id."""
    v = y.value if isinstance(y, ad.Tensor) else np.asarray(y)
    return np.argmax(v, axis=1).astype(np.int64)


# -- exact quantities ----------------------------------------------------------

def exact_cut(g: Graph, assignment, k: int) -> float:
    """Weight of edges with exactly one endpoint in partition ``k``."""
    a = np.asarray(assignment)
    inside_u = a[g.u] == k
    inside_v = a[g.v] == k
    return float(g.w[inside_u != inside_v].sum())


def total_cut(g: Graph, assignment) -> float:
    """Weight of edges whose endpoints lie in different partitions, each once."""
    a = np.asarray(assignment)
    return float(g.w[a[g.u] != a[g.v]].sum())


def partition_cuts(g: Graph, assignment, g_parts: int) -> np.ndarray:
    a = np.asarray(assignment)
    crossing = a[g.u] != a[g.v]
    cuts = np.bincount(a[g.u][crossing], weights=g.w[crossing], minlength=g_parts)
    cuts += np.bincount(a[g.v][crossing], weights=g.w[crossing], minlength=g_parts)
    return cuts


def partition_volumes(g: Graph, assignment, g_parts: int) -> np.ndarray:
    return np.bincount(np.asarray(assignment), weights=g.degrees, minlength=g_parts)


def exact_ncut(g: Graph, assignment, g_parts: int | None = None) -> float:
    """sum_k cut(S_k, ~S_k) / vol(S_k); partitions with zero volume add 0."""
    a = np.asarray(assignment, dtype=np.int64)
    if g_parts is None:
        g_parts = int(a.max()) + 1 if a.size else 1
    cuts = partition_cuts(g, a, g_parts)
    vols = partition_volumes(g, a, g_parts)
    live = vols > 0
    return float((cuts[live] / vols[live]).sum())


# -- differentiable quantities ----------------------------------------------------

def _edge_arrays(g: Graph):
    return g.directed


def expected_cut(g: Graph, y, k: int, path: str = "sparse"):
    """Directed-pair expected cut of partition ``k``: sum_ij A_ij Y_ik (1 - Y_jk)."""
    y = ad.as_tensor(y)
    col = ad.take_rows(ad.transpose(y), [k])  # 1 x n
    col = ad.transpose(col)                   # n x 1
    if path == "dense":
        outer = ad.matmul(col, ad.transpose(1.0 - col))
        return ad.accurate_sum(outer * g.dense_adjacency())
    src, dst, w = _edge_arrays(g)
    return ad.edge_pair_sum(col, 1.0 - col, src, dst, w)


def total_expected_cut(g: Graph, y, path: str = "sparse"):
    y = ad.as_tensor(y)
    if path == "dense":
        return ad.accurate_sum(ad.matmul(y, ad.transpose(1.0 - y)) * g.dense_adjacency())
    src, dst, w = _edge_arrays(g)
    return ad.edge_pair_sum(y, 1.0 - y, src, dst, w)


def volumes(g: Graph, y):
    """Expected volumes ``Yᵀ D`` as a ``1 x g`` row."""
    y = ad.as_tensor(y)
    d = np.asarray(g.degrees)[None, :]
    return ad.matmul(d, y)


def expected_ncut(g: Graph, y, path: str = "sparse", eps: float = EPS_VOL):
    """sum over (Y ⊘ Γ~)(1 - Y)ᵀ ⊙ A with Γ~ = max(Γ, eps)."""
    y = ad.as_tensor(y)
    gamma = ad.clamp_min(volumes(g, y), eps)
    scaled = y / gamma
    if path == "dense":
        return ad.accurate_sum(ad.matmul(scaled, ad.transpose(1.0 - y)) * g.dense_adjacency())
    src, dst, w = _edge_arrays(g)
    return ad.edge_pair_sum(scaled, 1.0 - y, src, dst, w)


def balance_error(y, g_parts: int):
    """sum_k (sum_i Y_ik - n/g)^2"""
    y = ad.as_tensor(y)
    n = y.shape[0]
    return ad.reduce_sum(ad.square(ad.reduce_sum(y, axis=0) - n / g_parts))


def gap_loss_terms(g: Graph, y, g_parts: int, lam: float = 1.0, normalized: bool = False,
                   path: str = "sparse"):
    """Return ``(loss, expected_ncut, balance_error)`` as tensors."""
    if lam < 0:
        raise ValueError("balance weight must be >= 0")
    y = ad.as_tensor(y)
    ncut = expected_ncut(g, y, path=path)
    bal = balance_error(y, g_parts)
    weight = lam
    if normalized:
        target = y.shape[0] / g_parts
        weight = lam / (target * target) if target > 0 else lam
    loss = ncut + bal * weight if weight != 0 else ad.add(ncut, 0.0)
    return loss, ncut, bal


def gap_loss(g: Graph, y, g_parts: int, lam: float = 1.0, normalized: bool = False,
             path: str = "sparse"):
    """Expected normalized cut plus ``lam`` times the balance error.

    With ``normalized=True`` the balance term is divided by ``(n/g)^2`` so
    both terms stay O(1) on large graphs.
    """
    return gap_loss_terms(g, y, g_parts, lam, normalized, path)[0]


def minibatch_loss_terms(g: Graph, y, nodes, g_parts: int, lam: float = 1.0,
                         normalized: bool = False, path: str = "sparse"):
    """Loss restricted to a node sample.

    Only edges with both endpoints in ``nodes`` count, volumes use the induced
    degrees, and the balance target becomes ``len(nodes) / g``. This is an
    approximation of the full-graph loss.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    sub = g.induced_subgraph(nodes)
    return gap_loss_terms(sub, ad.take_rows(ad.as_tensor(y), nodes), g_parts, lam,
                          normalized, path)
