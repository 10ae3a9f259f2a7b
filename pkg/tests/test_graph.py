import numpy as np
import pytest
from hypothesis import given, strategies as st

from lurecons.errors import Disconnected, InvalidEdge
from lurecons.graph import (build_graph, complete_graph, graph_matrices, incidence_matrix,
                            laplacian_pinv, random_connected_graph, spectral_data)


def test_build_graph_examples():
    g = build_graph(3, [(1, 2), (2, 3), (1, 3)])
    assert g.connected and g.edge_count == 3
    p = build_graph(3, [(1, 2), (2, 3)])
    assert p.connected and p.edge_count == 2 and p.is_spanning_tree
    d = build_graph(4, [(1, 2), (3, 4)])
    assert not d.connected


@pytest.mark.parametrize("edges", [[(1, 1)], [(1, 4)], [(0, 1)], [(1, 2), (2, 1)], []])
def test_build_graph_rejects(edges):
    with pytest.raises(InvalidEdge):
        build_graph(3, edges)


def test_single_node_rejected():
    with pytest.raises(InvalidEdge):
        build_graph(1, [])


def test_orientation_lower_to_higher():
    g = build_graph(3, [(2, 1), (3, 2)])
    assert g.edges == ((1, 2), (2, 3))
    E = incidence_matrix(g)
    np.testing.assert_array_equal(E, [[1, 0], [-1, 1], [0, -1]])


def test_p2_matrices():
    m = graph_matrices(build_graph(2, [(1, 2)]))
    np.testing.assert_array_equal(m.E, [[1], [-1]])
    np.testing.assert_array_equal(m.L, [[1, -1], [-1, 1]])


def test_k3_and_p3_spectra(k3, p3):
    np.testing.assert_allclose(np.linalg.eigvalsh(k3.L), [0, 3, 3], atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(p3.L), [0, 1, 3], atol=1e-12)
    np.testing.assert_allclose(spectral_data(p3).eigenvalues, [0, 1, 3], atol=1e-12)


def test_spanning_tree_lbar_identity(p3):
    sd = spectral_data(p3)
    np.testing.assert_allclose(p3.lbar, np.eye(2), atol=1e-10)
    assert sd.U1.shape == (2, 0)


def test_k3_spectral_checks_and_orthogonality(k3):
    sd = spectral_data(k3)
    np.testing.assert_allclose(np.linalg.eigvalsh(k3.lbar), [0, 1, 1], atol=1e-10)
    np.testing.assert_allclose(sd.U2.T @ sd.U2, np.eye(2), atol=1e-9)
    np.testing.assert_allclose(sd.U2.T @ sd.U1, 0, atol=1e-9)
    np.testing.assert_allclose(k3.E @ sd.U1, 0, atol=1e-9)


def test_disconnected_spectral_raises():
    with pytest.raises(Disconnected):
        spectral_data(graph_matrices(build_graph(4, [(1, 2), (3, 4)])))


def test_pinv_penrose(k3):
    L, Ld = k3.L, k3.pseudoinverse
    np.testing.assert_allclose(L @ Ld @ L, L, atol=1e-12)
    np.testing.assert_allclose(Ld @ L @ Ld, Ld, atol=1e-12)
    np.testing.assert_allclose(laplacian_pinv(np.zeros((2, 2))), 0)


def test_v1_forced(k3):
    sd = spectral_data(k3)
    np.testing.assert_array_equal(sd.V1[:, 0], np.full(3, 1 / np.sqrt(3)))


graphs = st.builds(lambda seed, n, p: random_connected_graph(np.random.default_rng(seed), n, p),
                   st.integers(0, 2**31), st.integers(2, 8), st.floats(0, 1))


@given(graphs)
def test_random_graph_invariants(g):
    m = graph_matrices(g)
    sd = spectral_data(m)
    assert np.array_equal(m.L, m.E @ m.E.T)
    assert np.array_equal(m.E.T @ np.ones(g.node_count), np.zeros(g.edge_count))
    U = sd.U
    np.testing.assert_allclose(U.T @ U, np.eye(g.edge_count), atol=1e-9)
    np.testing.assert_allclose(U @ sd.F @ U.T, m.edge_laplacian, atol=1e-8)
    np.testing.assert_allclose(sd.U2.T @ m.edge_laplacian @ sd.U2, sd.Gamma, atol=1e-8)
    Vt = sd.V
    np.testing.assert_allclose(Vt.T @ m.L @ Vt, np.diag(sd.eigenvalues), atol=1e-8)
    assert max(sd.checks.values()) <= 1e-8
    if g.is_spanning_tree:
        np.testing.assert_allclose(m.lbar, np.eye(g.edge_count), atol=1e-10)


@given(graphs, st.integers(0, 2**31))
def test_orientation_independence(g, seed):
    m = graph_matrices(g)
    rng = np.random.default_rng(seed)
    flip = np.diag(rng.choice([-1.0, 1.0], g.edge_count))
    E2 = m.E @ flip
    np.testing.assert_allclose(E2 @ E2.T, m.L, atol=1e-10)
    np.testing.assert_allclose(np.linalg.eigvalsh(E2.T @ E2), np.linalg.eigvalsh(m.edge_laplacian), atol=1e-10)
    lbar2 = E2.T @ m.pseudoinverse @ E2
    # L-bar transforms by the same sign flip, so its spectrum (the invariant) is unchanged
    np.testing.assert_allclose(np.linalg.eigvalsh(lbar2), np.linalg.eigvalsh(m.lbar), atol=1e-10)
    np.testing.assert_allclose(flip @ lbar2 @ flip, m.lbar, atol=1e-10)


def test_complete_graph_spectrum():
    for n in range(2, 7):
        sd = spectral_data(graph_matrices(complete_graph(n)))
        np.testing.assert_allclose(sd.nonzero_eigenvalues, n, atol=1e-10)
