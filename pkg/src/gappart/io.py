"""Readers and writers for the graph file formats the toolkit exchanges.

Edge list
    One ``u v [w]`` per line, ``#`` starts a comment. An optional
    ``p nodes <n>`` line fixes the node count (otherwise max id + 1).

METIS
    Header ``n m [fmt [ncon]]`` followed by one line per node listing its
    1-based neighbors (with weights when ``fmt`` ends in 1). ``%`` lines are
    comments.

Featured graph (JSON)
    ``{"nodes": [{"id": ..., "op_type": "MatMul"}, ...],
       "edges": [[u, v], [u, v, w], ...]}``. Node ids may be ints or strings;
    nodes are numbered in listing order. Edge direction is dropped.

Vocabulary
    One feature name per line; line index is the feature column.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError

UNK = "<unk>"


class FormatError(GraphError):
    """A graph file could not be parsed."""


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb" if isinstance(data, (bytes, bytearray)) else "w") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


# -- edge list -----------------------------------------------------------------

def load_edge_list(path, weighted: bool = False) -> Graph:
    header_n = None
    us, vs, ws = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "p":
                if len(parts) != 3 or parts[1] != "nodes":
                    raise FormatError(f"{path}:{lineno}: bad header, expected 'p nodes <n>'")
                try:
                    header_n = int(parts[2])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad node count {parts[2]!r}") from None
                continue
            if len(parts) not in (2, 3):
                raise FormatError(f"{path}:{lineno}: expected 'u v [w]', got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
                w = float(parts[2]) if weighted and len(parts) == 3 else 1.0
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed line {line!r}") from None
            if a < 0 or b < 0:
                raise FormatError(f"{path}:{lineno}: negative node id")
            if w < 0:
                raise FormatError(f"{path}:{lineno}: negative weight {w}")
            if w == 0 or not np.isfinite(w):
                raise FormatError(f"{path}:{lineno}: weight must be finite and > 0")
            if a == b:
                raise FormatError(f"{path}:{lineno}: self-loop on node {a} rejected")
            us.append(a)
            vs.append(b)
            ws.append(w)
    n = max(max(us, default=-1), max(vs, default=-1)) + 1
    if header_n is not None:
        if n > header_n:
            raise FormatError(f"{path}: node id {n - 1} out of range for 'p nodes {header_n}'")
        n = header_n
    return Graph.from_arrays(n, us, vs, ws, on_duplicate="ignore_same")


def write_edge_list(g: Graph, path, header: bool = True) -> None:
    lines = []
    if header:
        lines.append(f"p nodes {g.n}")
    weighted = g.is_weighted
    for a, b, w in zip(g.u, g.v, g.w):
        lines.append(f"{a} {b} {_fmt_weight(w)}" if weighted else f"{a} {b}")
    atomic_write(path, "\n".join(lines) + "\n")


# -- METIS -------------------------------------------------------------------------

def _metis_lines(fh):
    for lineno, raw in enumerate(fh, 1):
        if raw.lstrip().startswith("%"):
            continue
        yield lineno, raw.strip()


def load_metis(path) -> Graph:
    with open(path) as fh:
        lines = list(_metis_lines(fh))
    while lines and not lines[0][1]:
        lines.pop(0)
    if not lines:
        raise FormatError(f"{path}: empty METIS file")
    lineno, header = lines[0]
    parts = header.split()
    try:
        n, m = int(parts[0]), int(parts[1])
        fmt = parts[2].zfill(3) if len(parts) > 2 else "000"
        ncon = int(parts[3]) if len(parts) > 3 else 1
    except (ValueError, IndexError):
        raise FormatError(f"{path}:{lineno}: bad METIS header {header!r}") from None
    has_vsize, has_vwgt, has_ewgt = fmt[-3] == "1", fmt[-2] == "1", fmt[-1] == "1"
    body = lines[1:]
    # trailing blank lines past the n node lines are padding
    while len(body) > n and not body[-1][1]:
        body.pop()
    if len(body) != n:
        raise FormatError(f"{path}: header declares {n} nodes but {len(body)} adjacency lines follow")
    adj: dict[tuple[int, int], float] = {}
    for i, (lineno, line) in enumerate(body):
        try:
            tok = [float(t) for t in line.split()]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric token") from None
        skip = (1 if has_vsize else 0) + (ncon if has_vwgt else 0)
        tok = tok[skip:]
        step = 2 if has_ewgt else 1
        if len(tok) % step:
            raise FormatError(f"{path}:{lineno}: odd number of neighbor/weight tokens")
        for k in range(0, len(tok), step):
            j = int(tok[k]) - 1
            w = tok[k + 1] if has_ewgt else 1.0
            if j < 0 or j >= n or tok[k] != int(tok[k]):
                raise FormatError(f"{path}:{lineno}: neighbor {tok[k]} out of range 1..{n}")
            if j == i:
                raise FormatError(f"{path}:{lineno}: self-loop on node {i + 1}")
            if w <= 0:
                raise FormatError(f"{path}:{lineno}: edge weight must be > 0")
            if (i, j) in adj:
                raise FormatError(f"{path}:{lineno}: neighbor {j + 1} listed twice")
            adj[(i, j)] = w
    us, vs, ws = [], [], []
    for (i, j), w in adj.items():
        back = adj.get((j, i))
        if back is None:
            raise FormatError(f"{path}: asymmetric adjacency, {i + 1} lists {j + 1} but not vice versa")
        if back != w:
            raise FormatError(f"{path}: edge ({i + 1}, {j + 1}) has asymmetric weights")
        if i < j:
            us.append(i)
            vs.append(j)
            ws.append(w)
    if len(us) != m:
        raise FormatError(f"{path}: header declares {m} edges but adjacency lists contain {len(us)}")
    return Graph.from_arrays(n, us, vs, ws)


def write_metis(g: Graph, path) -> None:
    weighted = g.is_weighted
    head = f"{g.n} {g.num_edges}" + (" 001" if weighted else "")
    indptr, indices = g.neighbor_csr
    wsorted = g.directed[2]
    lines = [head]
    for i in range(g.n):
        lo, hi = indptr[i], indptr[i + 1]
        if weighted:
            toks = [f"{j + 1} {_fmt_weight(w)}" for j, w in zip(indices[lo:hi], wsorted[lo:hi])]
        else:
            toks = [str(j + 1) for j in indices[lo:hi]]
        lines.append(" ".join(toks))
    atomic_write(path, "\n".join(lines) + "\n")


# -- vocabulary + featured graphs ------------------------------------------------

def read_vocab(path) -> list[str]:
    with open(path) as fh:
        names = [line.rstrip("\n") for line in fh]
    while names and names[-1] == "":
        names.pop()
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate vocabulary entries")
    return names


def write_vocab(names, path) -> None:
    atomic_write(path, "".join(f"{s}\n" for s in names))


def onehot_encode(op_types, vocab, unknown: str = "error"):
    """One-hot rows for ``op_types`` over ``vocab``.

    ``unknown="unk"`` routes unseen types to a ``<unk>`` column (appended to
    the vocabulary if it is not already there); ``"error"`` raises.
    """
    vocab = list(vocab)
    if unknown not in ("error", "unk"):
        raise ValueError(f"unknown must be 'error' or 'unk', got {unknown!r}")
    index = {s: k for k, s in enumerate(vocab)}
    missing = sorted({t for t in op_types if t not in index})
    if missing:
        if unknown == "error":
            raise FormatError(f"op types not in vocabulary: {missing}")
        if UNK not in index:
            index[UNK] = len(vocab)
            vocab.append(UNK)
    x = np.zeros((len(op_types), len(vocab)))
    for r, t in enumerate(op_types):
        x[r, index.get(t, index.get(UNK, -1))] = 1.0
    return x, vocab


def load_featured_graph(path, vocab=None, unknown: str = "error") -> Graph:
    """Read a JSON featured graph and one-hot encode its ``op_type`` column.

    Without ``vocab`` the vocabulary is the sorted set of op types present.
    ``vocab`` may be a list of names or a path to a vocabulary file.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise FormatError(f"{path}: expected an object with 'nodes' and 'edges'")
    ids: dict = {}
    op_types = []
    for k, node in enumerate(doc["nodes"]):
        try:
            nid, op = node["id"], node["op_type"]
        except (KeyError, TypeError):
            raise FormatError(f"{path}: node #{k} needs 'id' and 'op_type'") from None
        if nid in ids:
            raise FormatError(f"{path}: duplicate node id {nid!r}")
        ids[nid] = k
        op_types.append(str(op))
    us, vs, ws = [], [], []
    for k, e in enumerate(doc["edges"]):
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise FormatError(f"{path}: edge #{k} must be [u, v] or [u, v, w]")
        for end in e[:2]:
            if end not in ids:
                raise FormatError(f"{path}: edge #{k} references unknown node {end!r}")
        a, b = ids[e[0]], ids[e[1]]
        if a == b:
            raise FormatError(f"{path}: edge #{k} is a self-loop on {e[0]!r}")
        us.append(a)
        vs.append(b)
        ws.append(float(e[2]) if len(e) == 3 else 1.0)
    if vocab is None:
        vocab = sorted(set(op_types))
    elif isinstance(vocab, (str, os.PathLike)):
        vocab = read_vocab(vocab)
    x, names = onehot_encode(op_types, vocab, unknown=unknown)
    # reciprocal dataflow edges collapse onto one undirected edge
    return Graph.from_arrays(len(op_types), us, vs, ws, node_features=x, feature_names=names,
                             on_duplicate="first",
                             meta={"op_types": op_types, "node_ids": list(ids)})


def write_featured_graph(path, op_types, edges, node_ids=None) -> None:
    node_ids = list(range(len(op_types))) if node_ids is None else list(node_ids)
    doc = {
        "nodes": [{"id": i, "op_type": t} for i, t in zip(node_ids, op_types)],
        "edges": [list(e) for e in edges],
    }
    atomic_write(path, json.dumps(doc, indent=1))


def read_assignment(path, n: int | None = None) -> np.ndarray:
    with open(path) as fh:
        vals = [line.strip() for line in fh if line.strip()]
    try:
        a = np.array([int(v) for v in vals], dtype=np.int64)
    except ValueError:
        raise FormatError(f"{path}: assignment lines must be integers") from None
    if n is not None and a.size != n:
        raise FormatError(f"{path}: expected {n} partition ids, found {a.size}")
    if a.size and a.min() < 0:
        raise FormatError(f"{path}: negative partition id")
    return a


def write_assignment(a, path) -> None:
    atomic_write(path, "".join(f"{int(k)}\n" for k in a))
