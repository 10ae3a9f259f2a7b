"""Consensus gain synthesis and fixed-gain analysis as LMI feasibility problems.

Synthesis (decision variables ``X, Y, Z, W``), for each ``lam`` in
``{lambda_2, lambda_N}``::

    [ sym(A X + lam B Y S2) + eps X    lam B Y + (S1 - S2) Z ]
    [ (lam B Y + (S1 - S2) Z)^T        -2 Z                  ]  <= 0

together with ``X > 0`` (diagonal for the ``thm2`` variant),
``[[Z, X], [X, W]] >= 0`` and ``W > 0`` diagonal.  ``W`` stands for the inverse
S-procedure multiplier, which keeps the coupling block affine.  The gain is
``K = Y X^-1``.

Analysis fixes ``K`` and searches ``P > 0`` and a diagonal multiplier
``Psi > 0`` with::

    [ A^T P + P A + eps P + lam/2 sym(P B K (S1 + S2)) + Psi (S1 - S2)^2 / 4   lam P B K ]
    [ lam K^T B^T P                                                            -Psi      ]  <= 0

Both problems are homogeneous, so ``X >= I`` (resp. ``P >= I``) fixes the scale
and the remaining strict inequalities carry a small margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..edge import AgentDynamics
from ..errors import (DimensionMismatch, Infeasible, InvalidSector, NoneFeasible,
                      NumericalFailure, SingularX, VariantMismatch)
from ..sector import SectorBounds
from .affine import AffineExpr, ConstraintSystem, VariableSpace, trace
from .backend import solve_system

MARGIN_REL = 1e-8
REGULARIZATION = 1e-6
ACCEPT_REL = 1e-9
VERIFY_TOL = 1e-7

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SynthesisProblem:
    agents: AgentDynamics
    lambda2: float
    lambdaN: float
    bounds: SectorBounds
    epsilon: float
    variant: str = "auto"

    def __post_init__(self):
        if not (self.lambda2 > 0 and self.lambdaN >= self.lambda2):
            raise ValueError(f"need 0 < lambda2 <= lambdaN, got {self.lambda2}, {self.lambdaN}")
        if self.epsilon < 0:
            raise ValueError("decay rate must be nonnegative")
        if self.bounds.n != self.agents.n:
            raise DimensionMismatch(f"sector covers {self.bounds.n} components, agents have n={self.agents.n}")
        variant = self.variant
        if variant == "auto":
            variant = "thm3" if self.bounds.scalar else "thm2"
        if variant not in ("thm2", "thm3"):
            raise VariantMismatch(f"unknown variant {variant!r}")
        if variant == "thm3" and not self.bounds.scalar:
            raise VariantMismatch("variant thm3 needs the same sector on every component")
        if variant == "thm2" and self.bounds.scalar:
            raise VariantMismatch("variant thm2 is for sectors that differ between components")
        object.__setattr__(self, "variant", variant)

    @classmethod
    def from_spectrum(cls, agents, spectral, bounds, epsilon, variant="auto") -> "SynthesisProblem":
        return cls(agents, spectral.lambda2, spectral.lambdaN, bounds, epsilon, variant)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return (self.lambda2,) if self.lambda2 == self.lambdaN else (self.lambda2, self.lambdaN)

    @property
    def scale(self) -> float:
        return 1.0 + float(np.linalg.norm(self.agents.A, 2))

    @property
    def margin(self) -> float:
        return MARGIN_REL * self.scale

    def with_epsilon(self, epsilon: float) -> "SynthesisProblem":
        return replace(self, epsilon=epsilon)


def _check_bounds(bounds: SectorBounds):
    for a, b in zip(bounds.sigma1, bounds.sigma2):
        if not a < b:
            raise InvalidSector(f"need sigma1 < sigma2, got [{a}, {b}]")


def decay_block(problem: SynthesisProblem, lam: float, X, Y, Z):
    """The per-eigenvalue synthesis block; works on arrays or affine expressions."""
    A, B = problem.agents.A, problem.agents.B
    S1, S2 = problem.bounds.Sigma1, problem.bounds.Sigma2
    top = A @ X + lam * (B @ Y @ S2)
    top = top + top.T + problem.epsilon * X
    off = lam * (B @ Y) + (S1 - S2) @ Z
    if isinstance(X, AffineExpr):
        return AffineExpr.block([[top, off], [off.T, -2.0 * Z]])
    return np.block([[top, off], [off.T, -2.0 * Z]])


def assemble(problem: SynthesisProblem, fixed_gain=None) -> ConstraintSystem:
    """Build the synthesis constraint system.

    With ``fixed_gain`` the linear constraint ``Y = K X`` is added, which turns
    the program into a feasibility test for that particular gain.
    """
    _check_bounds(problem.bounds)
    n, m = problem.agents.n, problem.agents.m
    space = VariableSpace()
    space.add("X", (n, n), "diagonal" if problem.variant == "thm2" else "symmetric")
    space.add("Y", (m, n), "full")
    space.add("Z", (n, n), "symmetric")
    space.add("W", (n, n), "diagonal")
    X, Y, Z, W = (space.expr(v) for v in "XYZW")
    system = ConstraintSystem(space)
    delta = problem.margin
    for lam in problem.lambdas:
        system.nsd(f"decay[lambda={lam:.12g}]", decay_block(problem, lam, X, Y, Z), delta)
    system.psd("X_pos", X, 1.0)
    system.psd("coupling", AffineExpr.block([[Z, X], [X, W]]))
    system.psd("W_pos", W, delta)
    if fixed_gain is not None:
        K = np.atleast_2d(np.asarray(fixed_gain, dtype=float))
        if K.shape != (m, n):
            raise DimensionMismatch(f"gain must be {m}x{n}, got {K.shape}")
        system.equal("Y=KX", Y - K @ X)
    system.minimize(trace(X) + REGULARIZATION * (trace(Z) + trace(W)))
    return system


@dataclass
class AnalysisResult:
    status: str
    K: np.ndarray
    P: np.ndarray | None = None
    Psi: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)
    lmi_residuals: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else float("inf")

    def require(self) -> "AnalysisResult":
        _raise_for(self.status, self.solver)
        return self


@dataclass
class SynthesisResult:
    status: str
    problem: SynthesisProblem
    X: np.ndarray | None = None
    Y: np.ndarray | None = None
    Z: np.ndarray | None = None
    W: np.ndarray | None = None
    K: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    certificate: AnalysisResult | None = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def P(self) -> np.ndarray | None:
        return None if self.X is None else np.linalg.inv(self.X)

    @property
    def Psi(self) -> np.ndarray | None:
        return None if self.W is None else np.diag(1.0 / np.diag(self.W))

    def require(self) -> "SynthesisResult":
        _raise_for(self.status, self.solver)
        return self


def _raise_for(status: str, info: dict):
    if status == INFEASIBLE:
        raise Infeasible(f"LMI infeasible ({info.get('raw_status')})")
    if status == NUMERICAL_FAILURE:
        raise NumericalFailure(f"SDP backend did not converge ({info.get('raw_status')})")


def _classify(res, scale: float) -> str:
    if res.status == "infeasible":
        return INFEASIBLE
    if res.status == "failed" or res.x is None:
        return NUMERICAL_FAILURE
    if res.violation <= ACCEPT_REL * scale:
        return FEASIBLE
    # converged to a point that violates the constraints: the margins cannot be met
    return INFEASIBLE if res.status == "unknown" else NUMERICAL_FAILURE


def _lmi_residuals(system: ConstraintSystem, x) -> dict:
    """Largest eigenvalue of each constraint written as ``(...) <= 0``, margins excluded."""
    return {lmi.name: -lmi.min_eig(x) for lmi in system.lmis}


def solve(problem: SynthesisProblem, backend: str = "cvxopt", fixed_gain=None,
          certify: bool = True, options: dict | None = None) -> SynthesisResult:
    """Solve the synthesis LMI; on success ``K = Y X^-1``.

    When ``certify`` is set, the extracted gain is re-checked with
    :func:`analyze_fixed_gain`, which searches a diagonal multiplier directly.
    """
    system = assemble(problem, fixed_gain)
    res = solve_system(system, backend, options, accept=ACCEPT_REL * problem.scale)
    info = {"backend": backend, "raw_status": res.raw_status, "iterations": res.iterations,
            "violation": res.violation}
    status = _classify(res, problem.scale)
    if status != FEASIBLE:
        return SynthesisResult(status, problem, solver=info)
    sp = system.space
    X, Y, Z, W = (sp.value(v, res.x) for v in "XYZW")
    X = 0.5 * (X + X.T)
    Z = 0.5 * (Z + Z.T)
    K = np.linalg.solve(X.T, Y.T).T
    out = SynthesisResult(status, problem, X, Y, Z, W, K, _lmi_residuals(system, res.x), info)
    if certify:
        out.certificate = analyze_fixed_gain(K, problem, backend=backend, options=options)
    return out


def schur_form(problem: SynthesisProblem, lam: float, X, Y, Z) -> np.ndarray:
    """Quadratic inequality obtained from the synthesis block by a Schur complement."""
    A, B = problem.agents.A, problem.agents.B
    S1, S2 = problem.bounds.Sigma1, problem.bounds.Sigma2
    top = A @ X + lam * B @ Y @ S2
    top = top + top.T + problem.epsilon * X
    off = lam * B @ Y + (S1 - S2) @ Z
    Q = top + 0.5 * off @ np.linalg.solve(Z, off.T)
    return 0.5 * (Q + Q.T)


def multiplier_form(problem: SynthesisProblem, lam: float, X, K, Psi) -> np.ndarray:
    """Congruence of the Lyapunov inequality by ``X = P^-1`` with an explicit multiplier."""
    A, B = problem.agents.A, problem.agents.B
    S1, S2 = problem.bounds.Sigma1, problem.bounds.Sigma2
    BK = B @ K
    lin = BK @ (S1 + S2) @ X
    Q = (X @ A.T + A @ X + problem.epsilon * X + lam ** 2 * BK @ np.linalg.solve(Psi, BK.T)
         + 0.5 * lam * (lin + lin.T) + 0.25 * X @ Psi @ (S1 - S2) @ (S1 - S2) @ X)
    return 0.5 * (Q + Q.T)


def lyapunov_form(problem: SynthesisProblem, lam: float, K, P, Psi) -> np.ndarray:
    """``A^T P + P A + eps P + lam/2 sym(P B K (S1+S2)) + Psi (S1-S2)^2/4 + lam^2 P B K Psi^-1 K^T B^T P``."""
    A, B = problem.agents.A, problem.agents.B
    S1, S2 = problem.bounds.Sigma1, problem.bounds.Sigma2
    PBK = P @ B @ np.atleast_2d(K)
    lin = PBK @ (S1 + S2)
    Q = (A.T @ P + P @ A + problem.epsilon * P + 0.5 * lam * (lin + lin.T)
         + 0.25 * Psi @ (S1 - S2) @ (S1 - S2) + lam ** 2 * PBK @ np.linalg.solve(Psi, PBK.T))
    return 0.5 * (Q + Q.T)


def _max_eig(Q: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(Q)[-1])


@dataclass
class VerificationReport:
    schur: dict
    multiplier: dict
    multiplier_offdiag: float
    tolerance: float = VERIFY_TOL

    @property
    def max_residual(self) -> float:
        return max(self.schur.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def verify_synthesis(result: SynthesisResult, problem: SynthesisProblem | None = None,
                     lambdas=None) -> VerificationReport:
    """Substitute a synthesis solution back into the quadratic inequalities.

    ``schur`` holds, per eigenvalue, the largest eigenvalue of the inequality
    recovered with ``Z`` (the pass criterion).  ``multiplier`` evaluates the
    same inequality before the ``Z`` substitution with ``Psi = W^-1``, and
    ``multiplier_offdiag`` measures how far the implied multiplier
    ``2 X^-1 Z X^-1`` is from diagonal; both are diagnostics only.
    """
    problem = problem or result.problem
    if not result.feasible:
        raise Infeasible("cannot verify an infeasible result")
    X, Y, Z, K = result.X, result.Y, result.Z, result.K
    if np.linalg.cond(X) > 1e12:
        raise SingularX(f"X is numerically singular (cond={np.linalg.cond(X):.3g})")
    lambdas = problem.lambdas if lambdas is None else [float(v) for v in np.atleast_1d(lambdas)]
    schur = {float(lam): _max_eig(schur_form(problem, lam, X, Y, Z)) for lam in lambdas}
    Psi = result.Psi
    mult = {float(lam): _max_eig(multiplier_form(problem, lam, X, K, Psi)) for lam in lambdas}
    Xinv = np.linalg.inv(X)
    implied = 2.0 * Xinv @ Z @ Xinv
    off = implied - np.diag(np.diag(implied))
    offdiag = float(np.linalg.norm(off) / max(np.linalg.norm(implied), 1e-300))
    return VerificationReport(schur, mult, offdiag)


def assemble_analysis(K, problem: SynthesisProblem) -> ConstraintSystem:
    A, B = problem.agents.A, problem.agents.B
    S1, S2 = problem.bounds.Sigma1, problem.bounds.Sigma2
    n = problem.agents.n
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (problem.agents.m, n):
        raise DimensionMismatch(f"gain must be {problem.agents.m}x{n}, got {K.shape}")
    space = VariableSpace()
    space.add("P", (n, n), "symmetric")
    space.add("Psi", (n, n), "diagonal")
    P, Psi = space.expr("P"), space.expr("Psi")
    BK = B @ K
    system = ConstraintSystem(space)
    delta = problem.margin
    for lam in problem.lambdas:
        lin = P @ (BK @ (S1 + S2))
        top = A.T @ P + P @ A + problem.epsilon * P + 0.5 * lam * lin.sym() + 0.25 * (Psi @ ((S1 - S2) @ (S1 - S2)))
        off = lam * (P @ BK)
        system.nsd(f"decay[lambda={lam:.12g}]", AffineExpr.block([[top, off], [off.T, -1.0 * Psi]]), delta)
    system.psd("P_pos", P, 1.0)
    system.psd("Psi_pos", Psi, delta)
    system.minimize(trace(P) + REGULARIZATION * trace(Psi))
    return system


def analyze_fixed_gain(K, problem: SynthesisProblem, lambdas=None, backend: str = "cvxopt",
                       options: dict | None = None) -> AnalysisResult:
    """Search a Lyapunov matrix ``P`` and diagonal multiplier ``Psi`` for a given gain.

    ``residuals`` are the largest eigenvalues of the quadratic (unlinearized)
    inequality at each eigenvalue in ``lambdas`` (default: the problem's
    ``lambda_2`` and ``lambda_N``).
    """
    _check_bounds(problem.bounds)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    system = assemble_analysis(K, problem)
    res = solve_system(system, backend, options, accept=ACCEPT_REL * problem.scale)
    info = {"backend": backend, "raw_status": res.raw_status, "iterations": res.iterations,
            "violation": res.violation}
    status = _classify(res, problem.scale)
    if status != FEASIBLE:
        return AnalysisResult(status, K, solver=info)
    P = system.space.value("P", res.x)
    P = 0.5 * (P + P.T)
    Psi = system.space.value("Psi", res.x)
    lambdas = problem.lambdas if lambdas is None else [float(v) for v in np.atleast_1d(lambdas)]
    resid = {float(lam): _max_eig(lyapunov_form(problem, lam, K, P, Psi)) for lam in lambdas}
    return AnalysisResult(status, K, P, Psi, resid, _lmi_residuals(system, res.x), info)


def is_feasible(problem: SynthesisProblem, backend: str = "cvxopt") -> bool:
    return solve(problem, backend, certify=False).feasible


def max_epsilon(problem: SynthesisProblem, eps_range=(1e-3, 10.0), tolerance: float = 1e-3,
                backend: str = "cvxopt") -> float:
    """Largest decay rate in ``eps_range`` for which synthesis is feasible (bisection)."""
    lo, hi = (float(v) for v in eps_range)
    if not 0 < lo < hi:
        raise ValueError("eps_range must be a positive increasing interval")
    if not is_feasible(problem.with_epsilon(lo), backend):
        raise NoneFeasible(f"synthesis infeasible already at epsilon={lo}")
    if is_feasible(problem.with_epsilon(hi), backend):
        return hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if is_feasible(problem.with_epsilon(mid), backend):
            lo = mid
        else:
            hi = mid
    return lo


def gain_feasible(problem: SynthesisProblem, K, backend: str = "cvxopt") -> bool:
    """Whether the synthesis LMI admits a solution with ``Y X^-1`` equal to ``K``."""
    return solve(problem, backend, fixed_gain=K, certify=False).feasible


def feasible_gain_interval(problem: SynthesisProblem, k_range=(-10.0, 0.0), grid: int = 41,
                           tol: float = 1e-4, backend: str = "cvxopt") -> list[tuple[float, float]]:
    """Feasible scalar gains inside ``k_range`` (single-input, single-state agents).

    A coarse grid locates feasible runs; every interior endpoint is then
    refined by bisection to ``tol``.
    """
    if (problem.agents.n, problem.agents.m) != (1, 1):
        raise DimensionMismatch("gain intervals are defined for scalar agents only")
    ks = np.linspace(k_range[0], k_range[1], grid)
    flags = [gain_feasible(problem, [[k]], backend) for k in ks]

    def edge(a, b, fa):
        # a has feasibility fa, b the opposite
        while abs(b - a) > tol:
            mid = 0.5 * (a + b)
            if gain_feasible(problem, [[mid]], backend) == fa:
                a = mid
            else:
                b = mid
        return a if fa else b

    intervals = []
    i = 0
    while i < grid:
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < grid and flags[j + 1]:
            j += 1
        lo = ks[i] if i == 0 else edge(ks[i], ks[i - 1], True)
        hi = ks[j] if j == grid - 1 else edge(ks[j], ks[j + 1], True)
        intervals.append((float(lo), float(hi)))
        i = j + 1
    return intervals
