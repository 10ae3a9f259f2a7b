"""Undirected communication graphs and the matrices derived from them.

Nodes are numbered from 1 in the public API.  Every edge ``(i, j)`` is
oriented from the lower to the higher index, and the columns of the
incidence matrix follow the input edge order, so the relative state carried
by edge ``k`` is ``x_i - x_j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import Disconnected, InvalidEdge, NumericalFailure

ZERO_EIG_RTOL = 1e-9
SPECTRAL_TOL = 1e-8


def zero_tolerance(eigenvalues: np.ndarray) -> float:
    """Absolute threshold under which a Laplacian eigenvalue counts as zero."""
    lam_max = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return ZERO_EIG_RTOL * max(1.0, lam_max)


@dataclass(frozen=True)
class NetworkGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    connected: bool

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def is_spanning_tree(self) -> bool:
        return self.connected and self.edge_count == self.node_count - 1


def _is_connected(node_count: int, edges: Sequence[tuple[int, int]]) -> bool:
    adjacency: list[list[int]] = [[] for _ in range(node_count + 1)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = {1}
    queue = deque([1])
    while queue:
        node = queue.popleft()
        for other in adjacency[node]:
            if other not in seen:
                seen.add(other)
                queue.append(other)
    return len(seen) == node_count


def build_graph(node_count: int, edges: Iterable[Sequence[int]]) -> NetworkGraph:
    """Validate an edge list and record whether the graph is connected.

    Disconnected graphs are accepted here; the spectral step rejects them.
    """
    if int(node_count) != node_count or node_count < 2:
        raise InvalidEdge(f"node_count must be an integer >= 2, got {node_count!r}")
    node_count = int(node_count)
    oriented: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) != 2:
            raise InvalidEdge(f"edge {edge!r} is not a pair")
        i, j = (int(v) for v in edge)
        if i == j:
            raise InvalidEdge(f"self-loop at node {i}")
        for v in (i, j):
            if not 1 <= v <= node_count:
                raise InvalidEdge(f"node {v} outside [1, {node_count}]")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InvalidEdge(f"duplicate edge {key}")
        seen.add(key)
        oriented.append(key)
    if not oriented:
        raise InvalidEdge("graph has no edges")
    return NetworkGraph(node_count, tuple(oriented), _is_connected(node_count, oriented))


def complete_graph(node_count: int) -> NetworkGraph:
    edges = [(i, j) for i in range(1, node_count + 1) for j in range(i + 1, node_count + 1)]
    return build_graph(node_count, edges)


def random_connected_graph(rng: np.random.Generator, node_count: int,
                           extra_edge_prob: float = 0.3) -> NetworkGraph:
    """Random spanning tree plus each remaining pair with ``extra_edge_prob``."""
    order = rng.permutation(node_count) + 1
    edges = []
    for k in range(1, node_count):
        parent = order[rng.integers(0, k)]
        edges.append((int(parent), int(order[k])))
    present = {(min(e), max(e)) for e in edges}
    for i in range(1, node_count + 1):
        for j in range(i + 1, node_count + 1):
            if (i, j) not in present and rng.random() < extra_edge_prob:
                edges.append((i, j))
    order_idx = rng.permutation(len(edges))
    return build_graph(node_count, [edges[k] for k in order_idx])


@dataclass(frozen=True)
class GraphMatrices:
    graph: NetworkGraph
    incidence: np.ndarray
    laplacian: np.ndarray
    pseudoinverse: np.ndarray
    edge_laplacian: np.ndarray
    lbar: np.ndarray

    # short aliases matching the usual notation
    @property
    def E(self) -> np.ndarray:
        return self.incidence

    @property
    def L(self) -> np.ndarray:
        return self.laplacian


def incidence_matrix(graph: NetworkGraph) -> np.ndarray:
    E = np.zeros((graph.node_count, graph.edge_count))
    for k, (i, j) in enumerate(graph.edges):
        E[i - 1, k] = 1.0
        E[j - 1, k] = -1.0
    return E


def laplacian_pinv(L: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix by eigendecomposition."""
    w, V = np.linalg.eigh(L)
    keep = np.abs(w) > zero_tolerance(w)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    Ldag = (V * inv) @ V.T
    return 0.5 * (Ldag + Ldag.T)


def graph_matrices(graph: NetworkGraph) -> GraphMatrices:
    E = incidence_matrix(graph)
    L = E @ E.T
    Ldag = laplacian_pinv(L)
    Le = E.T @ E
    lbar = E.T @ Ldag @ E
    lbar = 0.5 * (lbar + lbar.T)
    return GraphMatrices(graph, E, L, Ldag, Le, lbar)


@dataclass(frozen=True)
class SpectralData:
    """Eigen-data of L and the orthogonal edge transform ``U = [U1, U2]``.

    ``U1`` spans the null space of ``E`` (cycle space); ``U2 = E^T V2 Gamma^-1/2``.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    Gamma: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    checks: dict = field(default_factory=dict)

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambdaN(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def nonzero_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[1:]

    @property
    def V1(self) -> np.ndarray:
        return self.V[:, :1]

    @property
    def V2(self) -> np.ndarray:
        return self.V[:, 1:]

    @property
    def U(self) -> np.ndarray:
        return np.hstack([self.U1, self.U2])

    @property
    def F(self) -> np.ndarray:
        """``diag(0, Gamma)`` in the ``U`` basis, so that ``U F U^T = L_e``."""
        m1 = self.U1.shape[1]
        F = np.zeros((m1 + self.Gamma.shape[0],) * 2)
        F[m1:, m1:] = self.Gamma
        return F

    @property
    def Gamma_bar(self) -> np.ndarray:
        m1 = self.U1.shape[1]
        return np.diag(np.r_[np.zeros(m1), np.ones(self.Gamma.shape[0])])


def _spectrum_matches(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.max(np.abs(np.sort(actual) - np.sort(expected)))) if len(actual) else 0.0


def spectral_data(mats: GraphMatrices) -> SpectralData:
    N = mats.graph.node_count
    M = mats.graph.edge_count
    w, V = np.linalg.eigh(mats.laplacian)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    tol = zero_tolerance(w)
    if w[1] <= tol:
        raise Disconnected("graph not connected (lambda_2 is zero)")
    w[0] = 0.0
    V = V.copy()
    V[:, 0] = 1.0 / np.sqrt(N)
    gam = w[1:]
    Gamma = np.diag(gam)
    U2 = mats.incidence.T @ V[:, 1:] / np.sqrt(gam)

    # right null space of E from its SVD; rank(E) = N - 1 for connected graphs
    _, _, vt = np.linalg.svd(mats.incidence, full_matrices=True)
    U1 = vt[N - 1:, :].T.copy() if M > N - 1 else np.zeros((M, 0))

    lbar_eigs = np.linalg.eigvalsh(mats.lbar)
    le_eigs = np.linalg.eigvalsh(mats.edge_laplacian)
    expected_lbar = np.r_[np.zeros(M - N + 1), np.ones(N - 1)]
    expected_le = np.r_[np.zeros(M - N + 1), gam]
    checks = {
        "lbar_spectrum_err": _spectrum_matches(lbar_eigs, expected_lbar),
        "edge_laplacian_spectrum_err": _spectrum_matches(le_eigs, expected_le),
    }
    if max(checks.values()) > SPECTRAL_TOL * max(1.0, float(gam[-1])):
        raise NumericalFailure(f"edge spectra inconsistent with Laplacian: {checks}")
    return SpectralData(w, V, Gamma, U1, U2, checks)
