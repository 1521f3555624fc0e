"""Node feature construction and the feature contract a model is built against."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .eigen import symmetric_eigs
from .graph import Graph
from .io import UNK


class FeatureMismatch(ValueError):
    """A graph's features do not fit the model's feature specification."""


class _CenteredGram:
    """Implicit ``C^T C`` with ``C = A - 1 mu^T`` (rows of A mean-centered)."""

    def __init__(self, g: Graph):
        self.a = g.adjacency
        self.mu = np.asarray(g.degrees) / max(g.n, 1)
        self.shape = (g.n, g.n)

    def matvec(self, x):
        y = self.a @ x - (self.mu @ x)
        return self.a.T @ y - self.mu * y.sum()


def pca_features(g: Graph, dim: int, seed=0) -> np.ndarray:
    """Principal-component scores of the adjacency rows, zero-padded to ``dim``.

    Rows of the dense adjacency matrix are centered and projected on the top
    ``min(dim, n)`` principal directions. The dense matrix is never formed.
    """
    if dim < 1:
        raise ValueError(f"PCA width must be >= 1, got {dim}")
    n = g.n
    out = np.zeros((n, dim))
    k = min(dim, n)
    if g.num_edges == 0 or k == 0:
        return out
    op = _CenteredGram(g)
    _, vecs = symmetric_eigs(op, k, which="largest", seed=seed)
    # ascending order from the solver; leading component goes first
    vecs = vecs[:, ::-1]
    av = g.adjacency @ vecs
    scores = av - np.outer(np.ones(n), op.mu @ vecs)
    out[:, :k] = scores
    return out


def identity_features(n: int, dim: int) -> np.ndarray:
    """One-hot node index, truncated to ``dim`` columns."""
    x = np.zeros((n, dim))
    k = min(n, dim)
    x[np.arange(k), np.arange(k)] = 1.0
    return x


@dataclass(frozen=True)
class FeatureSpec:
    """How node features are produced for a model.

    kind
        ``onehot``: the graph's named one-hot columns, realigned to ``vocab``.
        ``pca``: :func:`pca_features` of width ``dim``.
        ``identity``: node-index one-hots of width ``dim``.
        ``given``: the graph's own feature matrix, which must have width ``dim``.
    """

    kind: str
    dim: int
    vocab: tuple[str, ...] | None = None
    unknown: str = "error"

    def __post_init__(self):
        if self.kind not in ("onehot", "pca", "identity", "given"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "onehot":
            if not self.vocab:
                raise ValueError("onehot features need a vocabulary")
            if self.dim != len(self.vocab):
                raise ValueError("onehot width must equal the vocabulary size")
        if self.dim < 1:
            raise ValueError("feature width must be >= 1")

    @classmethod
    def onehot(cls, vocab, unknown="error"):
        vocab = list(vocab)
        if unknown == "unk" and UNK not in vocab:
            vocab.append(UNK)
        return cls("onehot", len(vocab), tuple(vocab), unknown)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim, "unknown": self.unknown}
        if self.vocab is not None:
            d["vocab"] = list(self.vocab)
        return d

    @classmethod
    def from_dict(cls, d) -> FeatureSpec:
        vocab = d.get("vocab")
        return cls(d["kind"], int(d["dim"]), tuple(vocab) if vocab is not None else None,
                   d.get("unknown", "error"))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def build(self, g: Graph, seed=0) -> np.ndarray:
        if self.kind == "pca":
            return pca_features(g, self.dim, seed=seed)
        if self.kind == "identity":
            return identity_features(g.n, self.dim)
        if g.node_features is None:
            raise FeatureMismatch(f"{self.kind} features required but the graph has none")
        x = np.asarray(g.node_features)
        if self.kind == "given":
            if x.shape[1] != self.dim:
                raise FeatureMismatch(f"graph has {x.shape[1]} feature columns, model expects {self.dim}")
            return np.array(x)
        names = g.feature_names
        if names is None:
            raise FeatureMismatch("onehot features need named graph feature columns")
        if tuple(names) == self.vocab:
            return np.array(x)
        index = {s: k for k, s in enumerate(self.vocab)}
        missing = [s for s in names if s not in index]
        # columns that never fire do not matter
        used_missing = [s for j, s in enumerate(names) if s in missing and np.any(x[:, j] != 0)]
        if used_missing and (self.unknown == "error" or UNK not in index):
            raise FeatureMismatch(f"graph op types missing from the model vocabulary: {sorted(used_missing)}")
        out = np.zeros((g.n, self.dim))
        for j, s in enumerate(names):
            if s in index:
                out[:, index[s]] += x[:, j]
            elif s in used_missing:
                out[:, index[UNK]] += x[:, j]
        return out
