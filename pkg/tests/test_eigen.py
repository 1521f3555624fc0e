import numpy as np
import pytest
import scipy.sparse as sp

from gappart.eigen import EigenNonConvergence, symmetric_eigs
from gappart.graph import Graph, generate_erdos_renyi, laplacian


def test_path_fiedler_value(p4):
    lap = laplacian(p4)
    vals, vecs = symmetric_eigs(lap, 2)
    oracle = np.linalg.eigvalsh(lap.toarray())
    assert vals[1] == pytest.approx(oracle[1], abs=1e-9)
    assert vals[1] == pytest.approx(2 - np.sqrt(2), abs=1e-9)


def test_laplacian_null_space_is_constant():
    g = generate_erdos_renyi(60, 0.2, 1)
    assert len(set(g.connected_components())) == 1
    vals, vecs = symmetric_eigs(laplacian(g), 1)
    assert abs(vals[0]) < 1e-8
    np.testing.assert_allclose(vecs[:, 0], 1 / np.sqrt(60), atol=1e-6)


def test_identity():
    vals, _ = symmetric_eigs(sp.identity(10, format="csr"), 3)
    np.testing.assert_allclose(vals, 1.0)


def test_repeated_zero_eigenvalue():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    vals, vecs = symmetric_eigs(laplacian(g), 3)
    np.testing.assert_allclose(vals, [0, 0, 3], atol=1e-8)


@pytest.mark.parametrize("which", ["smallest", "largest"])
def test_against_dense_oracle(which):
    g = generate_erdos_renyi(300, 0.05, 7)
    lap = laplacian(g)
    vals, vecs = symmetric_eigs(lap, 6, which=which, seed=3)
    full = np.linalg.eigvalsh(lap.toarray())
    ref = full[:6] if which == "smallest" else full[-6:]
    fro = np.sqrt((lap.data ** 2).sum())
    np.testing.assert_allclose(vals, ref, atol=1e-5 * fro)
    resid = np.linalg.norm(lap @ vecs - vecs * vals, axis=0)
    assert resid.max() <= 1e-6 * fro
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(6), atol=1e-8)


def test_deterministic_per_seed():
    lap = laplacian(generate_erdos_renyi(100, 0.1, 2))
    a = symmetric_eigs(lap, 4, seed=5)
    b = symmetric_eigs(lap, 4, seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_non_convergence_reports_residual():
    lap = laplacian(generate_erdos_renyi(400, 0.05, 2))
    with pytest.raises(EigenNonConvergence) as info:
        symmetric_eigs(lap, 10, max_iter=20, krylov_dim=12)
    assert np.isfinite(info.value.residual)


def test_argument_validation():
    with pytest.raises(ValueError):
        symmetric_eigs(np.eye(3), 4)
    with pytest.raises(ValueError):
        symmetric_eigs(np.eye(3), 1, which="middle")
