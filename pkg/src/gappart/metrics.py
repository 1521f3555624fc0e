"""Partition quality measures."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import Graph
from .loss import balance_error, exact_ncut, expected_ncut, one_hot, total_cut


def partition_sizes(assignment, g_parts: int) -> np.ndarray:
    return np.bincount(np.asarray(assignment, dtype=np.int64), minlength=g_parts)


def edge_cut_ratio(g: Graph, assignment) -> float:
    """Cut weight (each edge once) over total edge weight; 0 for edgeless graphs."""
    total = g.total_weight
    if total == 0:
        return 0.0
    return total_cut(g, assignment) / total


def _balancedness_from_sizes(sizes, g_parts: int) -> float:
    sizes = np.asarray(sizes, dtype=np.float64)
    n = sizes.sum()
    if n == 0:
        return 1.0
    p = sizes / n
    return float(1.0 - np.mean((p - 1.0 / g_parts) ** 2))


def balancedness(assignment, g_parts: int) -> float:
    """``1 - (1/g) sum_k (p_k - 1/g)^2`` with ``p_k`` the fraction of nodes in S_k."""
    return _balancedness_from_sizes(partition_sizes(assignment, g_parts), g_parts)


def best_balancedness(n: int, g_parts: int) -> float:
    """Highest balancedness any assignment of ``n`` nodes can reach."""
    q, r = divmod(n, g_parts)
    sizes = [q + 1] * r + [q] * (g_parts - r)
    return _balancedness_from_sizes(sizes, g_parts)


@dataclass
class MetricsReport:
    edge_cut_ratio: float
    balancedness: float
    best_balancedness: float
    exact_ncut: float
    expected_ncut: float
    balance_error: float
    partition_sizes: list[int]
    wall_clock_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(g: Graph, assignment, g_parts: int, probs=None, wall_clock_ms: float = 0.0,
             **extra) -> MetricsReport:
    """Score a hard assignment. ``probs`` (the soft Y) feeds the expected terms;
    without it the one-hot of the assignment is used."""
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (g.n,):
        raise ValueError(f"assignment has {a.size} entries for a graph with {g.n} nodes")
    if a.size and (a.min() < 0 or a.max() >= g_parts):
        raise ValueError(f"partition ids must lie in 0..{g_parts - 1}")
    y = one_hot(a, g_parts) if probs is None else np.asarray(probs)
    return MetricsReport(
        edge_cut_ratio=edge_cut_ratio(g, a),
        balancedness=balancedness(a, g_parts),
        best_balancedness=best_balancedness(g.n, g_parts),
        exact_ncut=exact_ncut(g, a, g_parts),
        expected_ncut=expected_ncut(g, y).item() if g.n else 0.0,
        balance_error=balance_error(y, g_parts).item() if g.n else 0.0,
        partition_sizes=[int(s) for s in partition_sizes(a, g_parts)],
        wall_clock_ms=float(wall_clock_ms),
        extra=dict(extra),
    )


def degree_histogram(g: Graph) -> list[tuple[float, int]]:
    """``(degree, node count)`` pairs in ascending degree order."""
    vals, counts = np.unique(np.asarray(g.degrees), return_counts=True)
    return [(float(v), int(c)) for v, c in zip(vals, counts)]
