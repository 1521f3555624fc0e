"""Compiled and NumPy kernels must agree; both are exercised everywhere they exist."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gappart import _pykernels, kernels

from conftest import random_graph


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.backends()


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 15), g=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_edge_pair_sum_matches_dense(n, g, seed):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, n, 0.5, weighted=True)
    src, dst, w = graph.directed
    p = rng.normal(size=(n, g))
    q = rng.normal(size=(n, g))
    dense = float(np.sum((p @ q.T) * graph.dense_adjacency()))
    for impl in kernels.backends().values():
        assert impl.edge_pair_sum(src, dst, w, p, q) == pytest.approx(dense, abs=1e-12 * max(1, abs(dense)))
        gp, gq = impl.edge_pair_grad(src, dst, w, p, q, 1.5)
        np.testing.assert_allclose(gp, 1.5 * graph.dense_adjacency() @ q, atol=1e-12)
        np.testing.assert_allclose(gq, 1.5 * graph.dense_adjacency().T @ p, atol=1e-12)


def test_maxpool_backends_agree(backend):
    rng = np.random.default_rng(0)
    graph = random_graph(rng, 20, 0.2)
    indptr, indices = graph.neighbor_csr
    m = rng.normal(size=(20, 5))
    out, arg = backend.maxpool_sets(indptr, indices, m)
    ref_out, ref_arg = _pykernels.maxpool_sets(indptr, indices, m)
    np.testing.assert_array_equal(out, ref_out)
    np.testing.assert_array_equal(arg, ref_arg)
    grad = rng.normal(size=(20, 5))
    np.testing.assert_array_equal(backend.maxpool_sets_grad(arg, grad, 20),
                                  _pykernels.maxpool_sets_grad(ref_arg, grad, 20))
    for i in range(20):
        nb = indices[indptr[i]:indptr[i + 1]]
        expect = m[nb].max(axis=0) if nb.size else np.zeros(5)
        np.testing.assert_array_equal(out[i], expect)


def test_maxpool_ties_take_first_neighbor(backend):
    indptr = np.array([0, 2, 2], dtype=np.int64)
    indices = np.array([0, 1], dtype=np.int64)
    m = np.array([[1.0], [1.0]])
    out, arg = backend.maxpool_sets(indptr, indices, m)
    assert arg[0, 0] == 0 and arg[1, 0] == -1 and out[1, 0] == 0.0


@pytest.mark.parametrize("n,g", [(6, 2), (7, 3), (5, 2)])
def test_oracle_backends_agree(backend, n, g):
    graph = random_graph(np.random.default_rng(n * 10 + g), n, 0.6, weighted=True)
    args = (n, g, np.ascontiguousarray(graph.u), np.ascontiguousarray(graph.v),
            np.ascontiguousarray(graph.w), np.ascontiguousarray(graph.degrees))
    for balanced in (False, True):
        v, lab, cnt = backend.min_ncut_enumerate(*args, balanced)
        rv, rlab, rcnt = _pykernels.min_ncut_enumerate(*args, balanced)
        assert cnt == rcnt
        assert v == pytest.approx(rv, abs=1e-12)
        np.testing.assert_array_equal(lab, rlab)


def test_oracle_counts_are_stirling_numbers():
    # S(n, g): set partitions of n labelled nodes into exactly g blocks
    graph = random_graph(np.random.default_rng(0), 6, 0.5)
    args = (6, 3, graph.u, graph.v, graph.w, graph.degrees)
    for impl in kernels.backends().values():
        assert impl.min_ncut_enumerate(*args, False)[2] == 90
        assert impl.min_ncut_enumerate(4, 2, graph.u[:0], graph.v[:0], graph.w[:0],
                                       np.zeros(4), False)[2] == 7
