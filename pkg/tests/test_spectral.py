import numpy as np
import pytest
import scipy.sparse as sp

from oracles import dense_pencil
from sparsematch.errors import ConfigError, GraphError
from sparsematch.graph import AffinityGraph, knn_graph, laplacian
from sparsematch.spectral import (LARGEST, SMALLEST, embed,
                                  generalized_residuals, solve_generalized_eigen)


def graph_from(w):
    w = np.asarray(w, dtype=float)
    return AffinityGraph(sp.csr_matrix(w), w.sum(axis=1), 1, 1.0)


def ring(n):
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i + 1) % n] = w[(i + 1) % n, i] = 1.0
    return w


def test_two_node_closed_form():
    lp = laplacian(graph_from([[0, 1], [1, 0]]))
    emb = solve_generalized_eigen(lp, 2)
    np.testing.assert_allclose(emb.eigenvalues, [0, 2], atol=1e-14)
    np.testing.assert_allclose(emb.y[:, 0], [1 / np.sqrt(2)] * 2, atol=1e-14)
    np.testing.assert_allclose(emb.y[:, 1], [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-14)


def test_triangle_eigenvalues():
    lp = laplacian(graph_from(np.ones((3, 3)) - np.eye(3)))
    emb = solve_generalized_eigen(lp, 3)
    np.testing.assert_allclose(emb.eigenvalues, [0, 1.5, 1.5], atol=1e-13)
    vals, _, _ = dense_pencil(lp.l.toarray(), lp.d.toarray())
    np.testing.assert_allclose(emb.eigenvalues, vals, atol=1e-13)


def test_connected_graph_trivial_pair():
    g = knn_graph(np.random.default_rng(0).standard_normal((3, 40)), p=4)
    emb = solve_generalized_eigen(laplacian(g), 1)
    assert abs(emb.eigenvalues[0]) < 1e-12
    assert np.all(emb.y[:, 0] > 0)
    np.testing.assert_allclose(emb.y[:, 0], emb.y[0, 0], rtol=1e-10)


def test_ring_drop_trivial():
    g = graph_from(ring(10))
    emb = embed(g, 2, SMALLEST, drop_trivial=True)
    d = g.degrees
    np.testing.assert_allclose(emb.eigenvalues, [1 - np.cos(2 * np.pi / 10)] * 2,
                               atol=1e-12)
    assert np.all(np.abs(emb.y.T @ (d * np.ones(10))) < 1e-8)
    # the pair spans the first harmonic: c_i^2 + s_i^2 is constant
    np.testing.assert_allclose((emb.y ** 2).sum(axis=1), 2 / d.sum(), rtol=1e-10)


def test_full_basis_reconstruction():
    g = knn_graph(np.random.default_rng(3).standard_normal((2, 15)), p=3)
    emb = embed(g, 15, drop_trivial=False)
    v = np.random.default_rng(4).standard_normal(15)
    coef = emb.y.T @ (g.degrees * v)
    np.testing.assert_allclose(emb.y @ coef, v, atol=1e-8)
    np.testing.assert_allclose(emb.y.T @ (g.degrees[:, None] * emb.y), np.eye(15),
                               atol=1e-10)


def test_largest_and_smallest_disjoint():
    g = knn_graph(np.random.default_rng(5).standard_normal((3, 30)), p=4)
    lp = laplacian(g)
    lo = solve_generalized_eigen(lp, 15, SMALLEST)
    hi = solve_generalized_eigen(lp, 15, LARGEST)
    assert np.all(np.diff(lo.eigenvalues) >= 0)
    assert np.all(np.diff(hi.eigenvalues) <= 0)
    assert lo.eigenvalues.max() <= hi.eigenvalues.min() + 1e-12
    vals, _, _ = dense_pencil(lp.l.toarray(), lp.d.toarray())
    np.testing.assert_allclose(hi.eigenvalues, vals[::-1][:15], atol=1e-10)


@pytest.mark.parametrize("mode", [SMALLEST, LARGEST])
@pytest.mark.parametrize("seed", range(6))
def test_residuals_against_pencil(seed, mode):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    g = knn_graph(rng.standard_normal((5, n)), p=int(rng.integers(2, 7)))
    lp = laplacian(g)
    k = n // 3
    emb = solve_generalized_eigen(lp, k, mode)
    assert generalized_residuals(lp, emb.y, emb.eigenvalues).max() <= 1e-8
    vals, imag, _ = dense_pencil(lp.l.toarray(), lp.d.toarray())
    assert np.abs(imag).max() < 1e-10
    ref = vals[:k] if mode == SMALLEST else vals[::-1][:k]
    np.testing.assert_allclose(emb.eigenvalues, ref, atol=1e-9)


@pytest.mark.parametrize("mode", [SMALLEST, LARGEST])
def test_sparse_method_agrees(mode):
    g = knn_graph(np.random.default_rng(9).standard_normal((4, 80)), p=5)
    lp = laplacian(g)
    dense = solve_generalized_eigen(lp, 6, mode, method="dense", skip=1)
    sparse = solve_generalized_eigen(lp, 6, mode, method="sparse", skip=1)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, atol=1e-9)
    assert sparse.residuals.max() <= 1e-8


def test_sign_convention():
    g = knn_graph(np.random.default_rng(2).standard_normal((2, 25)), p=3)
    emb = embed(g, 6)
    for col in emb.y.T:
        assert col[np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]] > 0


def test_isolated_node_rejected():
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1
    with pytest.raises(GraphError, match="larger p"):
        solve_generalized_eigen(laplacian(graph_from(w)), 1)


def test_k_bounds():
    g = graph_from(ring(6))
    with pytest.raises(ConfigError):
        embed(g, 6, drop_trivial=True)
    with pytest.raises(ConfigError):
        solve_generalized_eigen(laplacian(g), 0)
    with pytest.raises(ConfigError):
        solve_generalized_eigen(laplacian(g), 1, mode="middle")
    assert embed(g, 6, drop_trivial=False).k == 6
