# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` exactly in semantics.

All reductions run in a fixed sequential order so results are reproducible.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef cnp.int64_t i64

cdef double _TIE = 1e-12


def edge_pair_sum(const i64[::1] src, const i64[::1] dst, const double[::1] w,
                  const double[:, ::1] P, const double[:, ::1] Q):
    cdef Py_ssize_t e, z, m = src.shape[0], c = P.shape[1]
    cdef double total = 0.0, comp = 0.0, acc, term, t
    with nogil:
        for e in range(m):
            acc = 0.0
            for z in range(c):
                acc = acc + P[src[e], z] * Q[dst[e], z]
            # Neumaier-compensated accumulation over edges
            term = w[e] * acc
            t = total + term
            if fabs(total) >= fabs(term):
                comp = comp + ((total - t) + term)
            else:
                comp = comp + ((term - t) + total)
            total = t
    return total + comp


def edge_pair_grad(const i64[::1] src, const i64[::1] dst, const double[::1] w,
                   const double[:, ::1] P, const double[:, ::1] Q, double g):
    cdef Py_ssize_t e, z, m = src.shape[0], c = P.shape[1]
    cdef Py_ssize_t a, b
    cdef double cw
    gP_arr = np.zeros((P.shape[0], c))
    gQ_arr = np.zeros((Q.shape[0], c))
    cdef double[:, ::1] gP = gP_arr
    cdef double[:, ::1] gQ = gQ_arr
    with nogil:
        for e in range(m):
            a = src[e]
            b = dst[e]
            cw = g * w[e]
            for z in range(c):
                gP[a, z] += cw * Q[b, z]
                gQ[b, z] += cw * P[a, z]
    return gP_arr, gQ_arr


def maxpool_sets(const i64[::1] indptr, const i64[::1] indices, const double[:, ::1] M):
    cdef Py_ssize_t n = indptr.shape[0] - 1, c = M.shape[1]
    cdef Py_ssize_t i, k, z, j
    out_arr = np.zeros((n, c))
    arg_arr = np.full((n, c), -1, dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef i64[:, ::1] arg = arg_arr
    cdef double x
    with nogil:
        for i in range(n):
            if indptr[i] == indptr[i + 1]:
                continue
            j = indices[indptr[i]]
            for z in range(c):
                out[i, z] = M[j, z]
                arg[i, z] = j
            for k in range(indptr[i] + 1, indptr[i + 1]):
                j = indices[k]
                for z in range(c):
                    x = M[j, z]
                    if x > out[i, z]:
                        out[i, z] = x
                        arg[i, z] = j
    return out_arr, arg_arr


def maxpool_sets_grad(const i64[:, ::1] arg, const double[:, ::1] G, Py_ssize_t num_rows):
    cdef Py_ssize_t n = arg.shape[0], c = arg.shape[1], i, z
    gM_arr = np.zeros((num_rows, c))
    cdef double[:, ::1] gM = gM_arr
    with nogil:
        for i in range(n):
            for z in range(c):
                if arg[i, z] >= 0:
                    gM[arg[i, z], z] += G[i, z]
    return gM_arr


def min_ncut_enumerate(Py_ssize_t n, Py_ssize_t g, const i64[::1] src, const i64[::1] dst,
                       const double[::1] w, const double[::1] deg, bint balanced):
    cdef Py_ssize_t m = src.shape[0]
    best_arr = np.zeros(n, dtype=np.int64)
    if n == 0 or g < 1 or g > n:
        return float("inf"), best_arr, 0
    a_arr = np.zeros(n, dtype=np.int64)
    pm_arr = np.zeros(n, dtype=np.int64)  # pm[i] = max(a[0..i-1]), pm[0] = 0
    cut_arr = np.zeros(g)
    vol_arr = np.zeros(g)
    size_arr = np.zeros(g, dtype=np.int64)
    cdef i64[::1] a = a_arr
    cdef i64[::1] pm = pm_arr
    cdef i64[::1] best = best_arr
    cdef double[::1] cut = cut_arr
    cdef double[::1] vol = vol_arr
    cdef i64[::1] size = size_arr
    cdef Py_ssize_t i, k, e, la, lb, top, smin, smax
    cdef long count = 0
    cdef double val, best_val = float("inf")
    cdef bint first = True
    with nogil:
        while True:
            # current string uses exactly g labels?
            top = pm[n - 1] if n > 1 else 0
            if a[n - 1] > top:
                top = a[n - 1]
            if top == g - 1:
                for k in range(g):
                    cut[k] = 0.0
                    vol[k] = 0.0
                    size[k] = 0
                for i in range(n):
                    vol[a[i]] += deg[i]
                    size[a[i]] += 1
                smin = n
                smax = 0
                for k in range(g):
                    if size[k] < smin:
                        smin = size[k]
                    if size[k] > smax:
                        smax = size[k]
                if not balanced or smax - smin <= 1:
                    for e in range(m):
                        la = a[src[e]]
                        lb = a[dst[e]]
                        if la != lb:
                            cut[la] += w[e]
                            cut[lb] += w[e]
                    val = 0.0
                    for k in range(g):
                        if vol[k] > 0:
                            val = val + cut[k] / vol[k]
                    count += 1
                    if first or val < best_val - _TIE:
                        first = False
                        best_val = val
                        for i in range(n):
                            best[i] = a[i]
            # advance to the next restricted-growth string with labels < g
            i = n - 1
            while i >= 1 and (a[i] > pm[i] or a[i] >= g - 1):
                i -= 1
            if i < 1:
                break
            a[i] += 1
            for k in range(i + 1, n):
                a[k] = 0
                pm[k] = pm[k - 1] if pm[k - 1] > a[k - 1] else a[k - 1]
    if count == 0:
        return float("inf"), best_arr, 0
    return best_val, best_arr, count
