"""Edge-state transformation, controller equivalence and the reduced Lur'e system.

The closed loop ``x' = (I_N (x) A) x + (I_N (x) B) u`` with the distributed law
``u = (E (x) K) Phi(z)``, ``z = (E^T (x) I_n) x`` is equivalent to the reduced
edge system

    zt2' = (I_{N-1} (x) A) zt2 + (I_{N-1} (x) B) wt2,
    wt2  = ((Gamma U2^T) (x) K) Phi(z),   z = (U2 (x) I_n) zt2,

while the cycle-space coordinates ``zt1 = (U1^T (x) I_n) z`` stay at zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ChannelCountMismatch, DimensionMismatch
from .graph import GraphMatrices, SpectralData
from .kernels import integrate_lure
from .sector import ChannelBank, apply

EIG_TOL = 1e-9


@dataclass(frozen=True)
class AgentDynamics:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def is_stabilizable(self) -> bool:
        # PBH test on the eigenvalues that are not strictly stable
        for lam in np.linalg.eigvals(self.A):
            if lam.real >= -EIG_TOL:
                pencil = np.hstack([self.A - lam * np.eye(self.n), self.B])
                if np.linalg.matrix_rank(pencil, tol=1e-9 * max(1.0, np.abs(pencil).max())) < self.n:
                    return False
        return True

    def is_marginally_stable(self) -> bool:
        return bool(np.all(np.linalg.eigvals(self.A).real <= EIG_TOL))

    def assumption_warnings(self, emit: bool = True) -> list[str]:
        msgs = []
        if not self.is_stabilizable():
            msgs.append("(A, B) is not stabilizable")
        if not self.is_marginally_stable():
            msgs.append("A has eigenvalues in the open right half-plane")
        if emit:
            for msg in msgs:
                warnings.warn(msg, stacklevel=2)
        return msgs


def _kron_eye(M: np.ndarray, n: int) -> np.ndarray:
    return np.kron(M, np.eye(n))


def edge_state(x, E: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    N = E.shape[0]
    if x.shape[-1] != N * n:
        raise DimensionMismatch(f"x has length {x.shape[-1]}, expected N*n = {N * n}")
    return x @ _kron_eye(E, n)


def transform_edge_state(z, U1: np.ndarray, U2: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Split ``z`` into cycle-space ``zt1`` and cut-space ``zt2`` coordinates."""
    z = np.asarray(z, dtype=float)
    M = U2.shape[0]
    if z.shape[-1] != M * n:
        raise DimensionMismatch(f"z has length {z.shape[-1]}, expected M*n = {M * n}")
    return z @ _kron_eye(U1, n), z @ _kron_eye(U2, n)


def inverse_transform(zt1, zt2, U1: np.ndarray, U2: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(zt1) @ _kron_eye(U1, n).T + np.asarray(zt2) @ _kron_eye(U2, n).T


def _check_bank(bank: ChannelBank, M: int, n: int):
    if len(bank) != M * n:
        raise ChannelCountMismatch(f"bank has {len(bank)} channels, need M*n = {M * n}")


def consensus_input(K, E: np.ndarray, bank: ChannelBank, x) -> np.ndarray:
    """``u = (E (x) K) Phi((E^T (x) I_n) x)``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = K.shape[1]
    _check_bank(bank, E.shape[1], n)
    z = edge_state(x, E, n)
    return apply(bank, z) @ np.kron(E, K).T


@dataclass(frozen=True)
class EdgeSystem:
    """Edge frame used by the reduced dynamics.

    ``coupling`` is ``U2^T L_e``, which equals ``Gamma U2^T`` on the eigen
    path.  With ``shortcut`` on a spanning tree, ``U = I`` and the reduced
    state is ``z`` itself, so the coupling becomes ``L_e``.
    """

    mats: GraphMatrices
    spectral: SpectralData
    U1: np.ndarray
    U2: np.ndarray
    shortcut: bool

    @classmethod
    def build(cls, mats: GraphMatrices, spectral: SpectralData, shortcut: bool = False) -> "EdgeSystem":
        M = mats.graph.edge_count
        if shortcut and mats.graph.is_spanning_tree:
            return cls(mats, spectral, np.zeros((M, 0)), np.eye(M), True)
        return cls(mats, spectral, spectral.U1, spectral.U2, False)

    @property
    def coupling(self) -> np.ndarray:
        return self.U2.T @ self.mats.edge_laplacian

    @property
    def U(self) -> np.ndarray:
        return np.hstack([self.U1, self.U2])

    def Abar(self, agents: AgentDynamics) -> np.ndarray:
        return np.kron(np.eye(self.U2.shape[1]), agents.A)

    def Btilde(self, agents: AgentDynamics, K) -> np.ndarray:
        return np.kron(self.coupling, agents.B @ np.atleast_2d(K))


def stabilizing_input(K, coupling: np.ndarray, bank: ChannelBank, z) -> np.ndarray:
    """``wt2 = (coupling (x) K) Phi(z)`` with ``coupling = Gamma U2^T``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    _check_bank(bank, coupling.shape[1], K.shape[1])
    return apply(bank, z) @ np.kron(coupling, K).T


def full_loop(agents: AgentDynamics, E: np.ndarray, K):
    """``(F, G, H)`` of the closed-loop agent network in Lur'e form."""
    K = np.atleast_2d(K)
    N = E.shape[0]
    F = np.kron(np.eye(N), agents.A)
    G = np.kron(np.eye(N), agents.B) @ np.kron(E, K)
    H = _kron_eye(E.T, agents.n)
    return F, G, H


def reduced_loop(agents: AgentDynamics, system: EdgeSystem, K):
    """``(F, G, H)`` of the reduced edge system in Lur'e form."""
    K = np.atleast_2d(K)
    F = system.Abar(agents)
    G = np.kron(np.eye(system.U2.shape[1]), agents.B) @ np.kron(system.coupling, K)
    H = _kron_eye(system.U2, agents.n)
    return F, G, H


@dataclass(frozen=True)
class EquivalenceReport:
    max_reduced_gap: float
    max_cycle_norm: float
    steps: int

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_reduced_gap <= tol and self.max_cycle_norm <= tol


def equivalence_check(agents: AgentDynamics, system: EdgeSystem, K, bank: ChannelBank, x0,
                      horizon: float = 10.0, step: float = 1e-3, backend=None) -> EquivalenceReport:
    """Integrate the agent network and the reduced edge system side by side.

    Reports the largest gap between the projected edge state of the agent
    network and the reduced state, and the largest cycle-space component.
    """
    n = agents.n
    E = system.mats.incidence
    _check_bank(bank, E.shape[1], n)
    steps = int(round(horizon / step))
    x0 = np.asarray(x0, dtype=float)
    traj_x, done_x = integrate_lure(*full_loop(agents, E, K), bank, x0, step, steps, backend=backend)
    z0 = edge_state(x0, E, n)
    _, zt2_0 = transform_edge_state(z0, system.U1, system.U2, n)
    traj_r, done_r = integrate_lure(*reduced_loop(agents, system, K), bank, zt2_0, step, steps, backend=backend)
    done = min(done_x, done_r)
    z = edge_state(traj_x[:done + 1], E, n)
    zt1, zt2 = transform_edge_state(z, system.U1, system.U2, n)
    gap = float(np.max(np.linalg.norm(zt2 - traj_r[:done + 1], axis=1)))
    cyc = float(np.max(np.linalg.norm(zt1, axis=1))) if zt1.shape[1] else 0.0
    if done < steps:
        gap = float("inf")
    return EquivalenceReport(gap, cyc, done)
