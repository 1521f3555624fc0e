"""Reference partitioners: exact enumeration, spectral clustering, random labels,
and an adapter for external command-line partitioners."""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np

from . import kernels
from .eigen import symmetric_eigs
from .graph import Graph, laplacian
from .io import write_metis

# largest instance sizes the oracle accepts, per partition count
ORACLE_LIMITS = {2: 16, 3: 10}


class OracleTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    assignment: np.ndarray
    ncut: float
    enumerated: int


def brute_force_min_ncut(g: Graph, g_parts: int, require_balanced: bool = False) -> OracleResult:
    """Exact minimum normalized cut by exhaustive enumeration.

    Assignments are enumerated once per set partition (first-occurrence label
    order) and must use every one of the ``g_parts`` labels. With
    ``require_balanced`` only assignments whose part sizes differ by at most
    one are considered.
    """
    limit = ORACLE_LIMITS.get(g_parts)
    if limit is None:
        raise OracleTooLarge(f"oracle supports g in {sorted(ORACLE_LIMITS)}, got g={g_parts}")
    if g.n > limit:
        raise OracleTooLarge(f"oracle limited to n <= {limit} for g={g_parts}, got n={g.n}")
    if g.n < g_parts:
        raise ValueError(f"cannot split {g.n} nodes into {g_parts} nonempty parts")
    value, labels, count = kernels.min_ncut_enumerate(
        g.n, g_parts, np.ascontiguousarray(g.u), np.ascontiguousarray(g.v),
        np.ascontiguousarray(g.w), np.ascontiguousarray(g.degrees), bool(require_balanced))
    if count == 0:
        raise ValueError("no assignment satisfies the constraints")
    return OracleResult(np.asarray(labels, dtype=np.int64), float(value), int(count))


def spectral_embedding(g: Graph, g_parts: int, seed=0) -> np.ndarray:
    """The ``g_parts`` eigenvectors of ``diag(D) - A`` with smallest eigenvalues."""
    _, vecs = symmetric_eigs(laplacian(g), g_parts, which="smallest", seed=seed)
    return vecs


def spectral_partition(g: Graph, g_parts: int, seed=0) -> np.ndarray:
    """Unnormalized-Laplacian spectral clustering followed by k-means.

    Disconnected graphs need no special handling: each zero eigenvalue
    contributes one component indicator direction to the embedding.
    """
    from sklearn.cluster import KMeans

    if g_parts > g.n:
        raise ValueError(f"g={g_parts} exceeds n={g.n}")
    emb = spectral_embedding(g, g_parts, seed=seed)
    km = KMeans(n_clusters=g_parts, init="k-means++", n_init=20, random_state=seed)
    raw = km.fit_predict(emb)
    # relabel by first occurrence so output does not depend on k-means label order
    order = {}
    for lab in raw:
        order.setdefault(int(lab), len(order))
    return np.array([order[int(lab)] for lab in raw], dtype=np.int64)


def random_partition(n: int, g_parts: int, seed=0) -> np.ndarray:
    """i.i.d. uniform labels."""
    return np.random.default_rng(seed).integers(0, g_parts, size=n).astype(np.int64)


class ExternalPartitioner:
    """Runs a command such as ``mytool {graph} {g}`` on a METIS file.

    The template may contain ``{graph}``, ``{g}`` and ``{out}``. With ``{out}``
    the partition is read from that file, otherwise from stdout. Either way the
    result must be one integer partition id per node.
    """

    def __init__(self, template: str, name: str = "external", timeout: float | None = None):
        if "{graph}" not in template:
            raise ValueError("external command template needs a {graph} placeholder")
        self.template = template
        self.name = name
        self.timeout = timeout

    def __call__(self, g: Graph, g_parts: int, seed=0) -> np.ndarray:
        with tempfile.TemporaryDirectory() as tmp:
            graph_path = os.path.join(tmp, "graph.metis")
            out_path = os.path.join(tmp, "partition.txt")
            write_metis(g, graph_path)
            cmd = self.template.format(graph=shlex.quote(graph_path), g=g_parts,
                                       out=shlex.quote(out_path), seed=seed)
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True,
                                  timeout=self.timeout)
            if proc.returncode != 0:
                raise RuntimeError(f"{self.name} exited with {proc.returncode}: {proc.stderr.strip()}")
            if "{out}" in self.template:
                with open(out_path) as fh:
                    text = fh.read()
            else:
                text = proc.stdout
        ids = [int(tok) for tok in text.split()]
        if len(ids) != g.n:
            raise RuntimeError(f"{self.name} returned {len(ids)} ids for {g.n} nodes")
        a = np.array(ids, dtype=np.int64)
        if a.min() < 0 or a.max() >= g_parts:
            raise RuntimeError(f"{self.name} returned ids outside 0..{g_parts - 1}")
        return a
