"""Fixed-step closed-loop simulation and trace audits."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .edge import AgentDynamics, EdgeSystem, full_loop
from .errors import ChannelCountMismatch, DimensionMismatch, NonFiniteState
from .graph import GraphMatrices, spectral_data
from .kernels import integrate_lure
from .sector import KIND_SATURATION, ChannelBank, apply

BLOWUP = 1e12
DEFAULT_STEP = 1e-3


@dataclass
class SimulationTrace:
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    u: np.ndarray
    consensus_error: np.ndarray
    N: int
    n: int
    m: int
    V: np.ndarray | None = None
    U2: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.z.shape[1] // self.n

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def relative_consensus_error(self) -> float:
        e0 = self.consensus_error[0]
        return float(self.consensus_error[-1] / e0) if e0 > 0 else float(self.consensus_error[-1])

    def agent_states(self) -> np.ndarray:
        """States as a ``(samples, N, n)`` array."""
        return self.x.reshape(len(self.times), self.N, self.n)


def consensus_error(x: np.ndarray, N: int, n: int) -> np.ndarray:
    """``max_{i<j} ||x_i - x_j||_2`` for every sample row of ``x``."""
    xs = np.atleast_2d(x).reshape(-1, N, n)
    err = np.zeros(xs.shape[0])
    for i, j in combinations(range(N), 2):
        np.maximum(err, np.linalg.norm(xs[:, i] - xs[:, j], axis=1), out=err)
    return err


def lyapunov_values(z: np.ndarray, U2: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``zt2^T (I (x) P) zt2`` with ``zt2 = (U2^T (x) I_n) z`` per sample."""
    n = P.shape[0]
    zt2 = np.atleast_2d(z) @ np.kron(U2, np.eye(n))
    blocks = zt2.reshape(zt2.shape[0], -1, n)
    return np.einsum("tbi,ij,tbj->t", blocks, P, blocks)


def simulate(agents: AgentDynamics, mats: GraphMatrices, K, bank: ChannelBank, x0,
             horizon: float, step: float = DEFAULT_STEP, P: np.ndarray | None = None,
             system: EdgeSystem | None = None, backend: str | None = None) -> SimulationTrace:
    """Closed loop ``x' = (I (x) A) x + (I (x) B) (E (x) K) Phi((E^T (x) I) x)`` by RK4.

    The control input is recomputed at every stage.  If ``P`` is given the
    Lyapunov value along the reduced edge state is recorded as well.
    """
    if not step > 0 or horizon < step:
        raise ValueError("need step > 0 and horizon >= step")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    N, M, n = mats.graph.node_count, mats.graph.edge_count, agents.n
    if len(bank) != M * n:
        raise ChannelCountMismatch(f"bank has {len(bank)} channels, need M*n = {M * n}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (N * n,):
        raise DimensionMismatch(f"x0 has length {x0.size}, expected {N * n}")
    steps = int(round(horizon / step))
    F, G, H = full_loop(agents, mats.incidence, K)
    traj, done = integrate_lure(F, G, H, bank, x0, step, steps, BLOWUP, backend=backend)
    x = traj[:done + 1]
    times = step * np.arange(done + 1)
    z = x @ H.T
    y = apply(bank, z)
    u = y @ np.kron(mats.incidence, K).T
    if P is not None and system is None:
        system = EdgeSystem.build(mats, spectral_data(mats))
    U2 = None if system is None else system.U2
    V = None if P is None else lyapunov_values(z, U2, np.asarray(P, dtype=float))
    trace = SimulationTrace(times, x, z, y, u, consensus_error(x, N, n), N, n, agents.m, V, U2,
                            {"step": step, "horizon": horizon, "completed": done == steps})
    if done < steps:
        raise NonFiniteState(f"state exceeded {BLOWUP:g} at t={step * (done + 1):g}", trace)
    return trace


def rk4(f: Callable[[float, np.ndarray], np.ndarray], x0, step: float, steps: int) -> np.ndarray:
    """Plain RK4 for general right-hand sides; returns ``steps + 1`` samples."""
    out = np.empty((steps + 1, len(x0)))
    s = np.array(x0, dtype=float)
    out[0] = s
    t = 0.0
    for k in range(steps):
        k1 = f(t, s)
        k2 = f(t + 0.5 * step, s + 0.5 * step * k1)
        k3 = f(t + 0.5 * step, s + 0.5 * step * k2)
        k4 = f(t + step, s + step * k3)
        s = s + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > BLOWUP:
            raise NonFiniteState(f"state exceeded {BLOWUP:g} at t={t + step:g}", out[:k + 1])
        out[k + 1] = s
        t += step
    return out


@dataclass
class LyapunovAudit:
    passed: bool
    worst_ratio: float
    first_violation_time: float | None


def lyapunov_audit(trace: SimulationTrace, P: np.ndarray, epsilon: float,
                   U2: np.ndarray | None = None) -> LyapunovAudit:
    """Check ``V(t) <= V(0) exp(-eps t) (1 + 1e-6) + 1e-12`` on every sample."""
    U2 = trace.U2 if U2 is None else U2
    if U2 is None:
        raise ValueError("trace carries no edge frame; pass U2")
    V = lyapunov_values(trace.z, U2, np.asarray(P, dtype=float))
    t = trace.times - trace.times[0]
    envelope = V[0] * np.exp(-epsilon * t)
    bad = V > envelope * (1 + 1e-6) + 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(envelope > 0, V / envelope, 0.0)
    first = float(trace.times[np.argmax(bad)]) if bad.any() else None
    return LyapunovAudit(not bad.any(), float(np.max(ratio)), first)


@dataclass
class ConstraintAudit:
    max_abs_y: np.ndarray
    max_abs_z: np.ndarray
    limit_ok: bool
    sector_ok: bool
    worst_sector_product: float

    @property
    def passed(self) -> bool:
        return self.limit_ok and self.sector_ok


def constraint_audit(trace: SimulationTrace, bank: ChannelBank, limits=None) -> ConstraintAudit:
    """Per-channel bound on the exchanged values and pointwise sector products.

    ``limits`` (scalar or per channel) defaults to the saturation levels of the
    bank; channels without a limit are only checked against the sector.
    """
    max_y = np.max(np.abs(trace.y), axis=0)
    max_z = np.max(np.abs(trace.z), axis=0)
    if limits is None:
        pb = bank.packed
        lim = np.where(pb.kinds == KIND_SATURATION, pb.params, np.inf)
    else:
        lim = np.broadcast_to(np.asarray(limits, dtype=float), max_y.shape)
    limit_ok = bool(np.all(max_y <= lim + 1e-9))
    worst = -np.inf
    sector_ok = True
    if bank.bounds is not None:
        s1 = np.tile(bank.bounds.sigma1, bank.edge_count)
        s2 = np.tile(bank.bounds.sigma2, bank.edge_count)
        # saturation sectors are only claimed inside the operating bound
        beta = np.array([c.operating_bound for c in bank.channels])
        inside = np.abs(trace.z) <= beta
        prod = (trace.y - s1 * trace.z) * (trace.y - s2 * trace.z)
        prod = np.where(inside, prod, -np.inf)
        worst = float(np.max(prod)) if prod.size else -np.inf
        sector_ok = worst <= 1e-12
    return ConstraintAudit(max_y, max_z, limit_ok, sector_ok, worst)


def trace_columns(trace: SimulationTrace) -> list[str]:
    N, n, m, M = trace.N, trace.n, trace.m, trace.M
    cols = ["t"]
    cols += [f"x_{i}_{k}" for i in range(1, N + 1) for k in range(1, n + 1)]
    cols += [f"z_{j}_{k}" for j in range(1, M + 1) for k in range(1, n + 1)]
    cols += [f"y_{j}_{k}" for j in range(1, M + 1) for k in range(1, n + 1)]
    cols += [f"u_{i}_{k}" for i in range(1, N + 1) for k in range(1, m + 1)]
    cols += ["V", "consensus_error"]
    return cols


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def write_csv(trace: SimulationTrace, path_or_buffer, every: int = 1) -> None:
    """One row per sample (every ``every``-th), 12 significant digits."""
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(trace))
        V = trace.V if trace.V is not None else np.full(len(trace.times), np.nan)
        for r in range(0, len(trace.times), every):
            row = [trace.times[r], *trace.x[r], *trace.z[r], *trace.y[r], *trace.u[r], V[r],
                   trace.consensus_error[r]]
            w.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def csv_text(trace: SimulationTrace, every: int = 1) -> str:
    buf = io.StringIO()
    write_csv(trace, buf, every)
    return buf.getvalue()
