"""Front-wheel-steered robots driven through their heading points.

Each robot's heading point ``C`` obeys ``xdot = M(theta) [v, omega]^T`` with
``M = [[cos, -r sin], [sin, r cos]]``.  Choosing ``[v, omega] = M^-1 u``
turns every robot into a pair of integrators ``xdot = u``, so the consensus
law designed for ``A = 0, B = I_2`` applies directly.  The heading angle is
integrated alongside (``theta' = omega``) because ``M`` depends on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .graph import GraphMatrices
from .sector import ChannelBank, apply, apply_packed
from .sim import DEFAULT_STEP, consensus_error, rk4

ANGLE_EPS = 1e-12


def kinematic_matrix(theta: float, r: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -r * s], [s, r * c]])


def body_inputs(theta, u, r: float) -> tuple[np.ndarray, np.ndarray]:
    """``[v, omega] = M(theta)^-1 u``, vectorized over robots.  ``det M = r``."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float).reshape(theta.shape + (2,))
    c, s = np.cos(theta), np.sin(theta)
    v = c * u[..., 0] + s * u[..., 1]
    omega = (-s * u[..., 0] + c * u[..., 1]) / r
    return v, omega


def real_inputs(v, omega) -> tuple[np.ndarray, np.ndarray]:
    """Longitudinal speed and steering angle ``phi = atan2(omega, v)``.

    ``phi`` is set to 0 when both arguments are below 1e-12 in magnitude.
    """
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    phi = np.arctan2(omega, v)
    tiny = (np.abs(v) < ANGLE_EPS) & (np.abs(omega) < ANGLE_EPS)
    return v.copy(), np.where(tiny, 0.0, phi)


def recover_input(theta, v, phi, r: float) -> np.ndarray:
    """Inverse of :func:`real_inputs` followed by the forward map ``u = M [v, omega]``.

    Needs ``v != 0``: ``omega = v tan(phi)``.
    """
    theta = np.asarray(theta, dtype=float)
    omega = np.asarray(v) * np.tan(phi)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * v - r * s * omega, s * v + r * c * omega], axis=-1)


@dataclass(frozen=True)
class RobotTeam:
    """``N`` robots with heading-point offset ``r`` (decimeters)."""

    mats: GraphMatrices
    r: float
    gain: np.ndarray        # 2x2 consensus gain K
    bank: ChannelBank

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if len(self.bank) != 2 * self.mats.graph.edge_count:
            raise DimensionMismatch("robot bank needs 2 channels per edge")
        E = self.mats.incidence
        object.__setattr__(self, "_relative", np.kron(E.T, np.eye(2)))
        object.__setattr__(self, "_spread", np.kron(E, np.asarray(self.gain, dtype=float)))

    @property
    def N(self) -> int:
        return self.mats.graph.node_count

    def consensus_input(self, pos: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(z, y, u) for stacked heading-point positions ``pos`` of length 2N."""
        z = self._relative @ pos
        y = apply_packed(self.bank.packed, z)
        return z, y, self._spread @ y

    def rhs(self, _t: float, s: np.ndarray) -> np.ndarray:
        N = self.N
        pos, theta = s[:2 * N], s[2 * N:]
        _, _, u = self.consensus_input(pos)
        ux, uy = u[0::2], u[1::2]
        c, sn = np.cos(theta), np.sin(theta)
        v = c * ux + sn * uy
        omega = (c * uy - sn * ux) / self.r
        out = np.empty(3 * N)
        out[0:2 * N:2] = c * v - self.r * sn * omega
        out[1:2 * N:2] = sn * v + self.r * c * omega
        out[2 * N:] = omega
        return out


@dataclass
class RobotTrace:
    times: np.ndarray
    pos: np.ndarray        # (samples, 2N): x_C1, y_C1, x_C2, ...
    theta: np.ndarray      # (samples, N)
    z: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    consensus_error: np.ndarray

    def relative_consensus_error(self) -> float:
        e0 = self.consensus_error[0]
        return float(self.consensus_error[-1] / e0) if e0 > 0 else float(self.consensus_error[-1])

    def columns(self) -> list[str]:
        N = self.theta.shape[1]
        M = self.z.shape[1] // 2
        cols = ["t"] + [f"x_{i}_{k}" for i in range(1, N + 1) for k in (1, 2)]
        cols += [f"theta_{i}" for i in range(1, N + 1)]
        cols += [f"z_{j}_{k}" for j in range(1, M + 1) for k in (1, 2)]
        cols += [f"y_{j}_{k}" for j in range(1, M + 1) for k in (1, 2)]
        cols += [f"u_{i}_{k}" for i in range(1, N + 1) for k in (1, 2)]
        cols += [f"v_{i}" for i in range(1, N + 1)] + [f"phi_{i}" for i in range(1, N + 1)]
        return cols + ["consensus_error"]

    def rows(self, every: int = 1):
        for r in range(0, len(self.times), every):
            yield [self.times[r], *self.pos[r], *self.theta[r], *self.z[r], *self.y[r],
                   *self.u[r], *self.v[r], *self.phi[r], self.consensus_error[r]]


def simulate_robots(team: RobotTeam, pos0, theta0, horizon: float,
                    step: float = DEFAULT_STEP) -> RobotTrace:
    N = team.N
    pos0 = np.asarray(pos0, dtype=float).ravel()
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if pos0.shape != (2 * N,) or theta0.shape != (N,):
        raise DimensionMismatch(f"need {2 * N} positions and {N} headings")
    steps = int(round(horizon / step))
    traj = rk4(team.rhs, np.r_[pos0, theta0], step, steps)
    pos, theta = traj[:, :2 * N], traj[:, 2 * N:]
    E2 = np.kron(team.mats.incidence, np.eye(2))
    z = pos @ E2
    y = apply(team.bank, z)
    u = y @ np.kron(team.mats.incidence, team.gain).T
    v, omega = body_inputs(theta, u.reshape(-1, N, 2), team.r)
    _, phi = real_inputs(v, omega)
    times = step * np.arange(steps + 1)
    return RobotTrace(times, pos, theta, z, y, u, v, omega, phi, consensus_error(pos, N, 2))
