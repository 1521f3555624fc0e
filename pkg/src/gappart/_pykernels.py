"""Pure NumPy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used when
the extension is not built or ``GAPPART_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np

_TIE = 1e-12


def edge_pair_sum(src, dst, w, P, Q):
    """sum_e w_e * <P[src_e], Q[dst_e]>"""
    if src.shape[0] == 0:
        return 0.0
    per_edge = np.einsum("ij,ij->i", P[src], Q[dst])
    return math.fsum(w * per_edge)


def edge_pair_grad(src, dst, w, P, Q, g):
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    if src.shape[0]:
        cw = (g * w)[:, None]
        np.add.at(gP, src, cw * Q[dst])
        np.add.at(gQ, dst, cw * P[src])
    return gP, gQ


def maxpool_sets(indptr, indices, M):
    """Row-wise max of ``M`` over each index set; empty sets give a zero row.

    Returns ``(out, arg)`` where ``arg[i, c]`` is the row of ``M`` that won
    column ``c`` for set ``i`` (first occurrence on ties), or -1.
    """
    n = indptr.shape[0] - 1
    c = M.shape[1]
    out = np.zeros((n, c))
    arg = np.full((n, c), -1, dtype=np.int64)
    if indices.shape[0] == 0:
        return out, arg
    counts = np.diff(indptr)
    nonempty = counts > 0
    gathered = M[indices]
    starts = indptr[:-1][nonempty]
    out[nonempty] = np.maximum.reduceat(gathered, starts, axis=0)
    # first position in each segment that attains the max
    seg = np.repeat(np.arange(n), counts)
    hit = gathered == out[seg]
    pos = np.arange(indices.shape[0])[:, None]
    first = np.where(hit, pos, indices.shape[0])
    best = np.minimum.reduceat(first, starts, axis=0)
    arg[nonempty] = indices[best]
    return out, arg


def maxpool_sets_grad(arg, G, num_rows):
    gM = np.zeros((num_rows, G.shape[1]))
    rows, cols = np.nonzero(arg >= 0)
    np.add.at(gM, (arg[rows, cols], cols), G[rows, cols])
    return gM


def _rgs_block(n, g):
    """All restricted-growth strings of length n using exactly g labels."""
    out = []
    a = [0] * n
    mx = [0] * n  # mx[i] = max label among a[:i+1]

    def rec(i):
        if i == n:
            if mx[n - 1] == g - 1:
                out.append(list(a))
            return
        top = min(mx[i - 1] + 1, g - 1)
        # prune: remaining positions must be able to introduce missing labels
        for lab in range(top + 1):
            cur = max(mx[i - 1], lab)
            if (g - 1 - cur) > (n - 1 - i):
                continue
            a[i] = lab
            mx[i] = cur
            rec(i + 1)

    if n == 0 or g < 1 or g > n:
        return np.zeros((0, n), dtype=np.int64)
    a[0] = 0
    mx[0] = 0
    if n == 1:
        return np.array([[0]], dtype=np.int64) if g == 1 else np.zeros((0, 1), dtype=np.int64)
    rec(1)
    return np.array(out, dtype=np.int64).reshape(-1, n)


def min_ncut_enumerate(n, g, src, dst, w, deg, balanced):
    """Exhaustive minimum normalized cut over assignments using all g labels.

    Label permutations are skipped by enumerating restricted-growth strings.
    Returns ``(best_value, best_labels, count)``.
    """
    labels = _rgs_block(n, g)
    if balanced and labels.shape[0]:
        sizes = np.stack([(labels == k).sum(1) for k in range(g)], axis=1)
        labels = labels[(sizes.max(1) - sizes.min(1)) <= 1]
    count = labels.shape[0]
    if count == 0:
        return np.inf, np.zeros(n, dtype=np.int64), 0
    total = np.zeros(count)
    for k in range(g):
        inside = labels == k
        vol = inside.astype(np.float64) @ deg
        cut = (inside[:, src] != inside[:, dst]).astype(np.float64) @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            total += np.where(vol > 0, cut / np.where(vol > 0, vol, 1.0), 0.0)
    best = 0
    for i in range(1, count):
        if total[i] < total[best] - _TIE:
            best = i
    return float(total[best]), labels[best].copy(), int(count)
