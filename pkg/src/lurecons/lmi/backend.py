"""Adapter from :class:`ConstraintSystem` to the cvxopt SDP solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import ConstraintSystem

# tried in order until the returned point satisfies the constraints
TOLERANCE_LADDER = (
    {"abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10, "maxiters": 100},
    {"abstol": 1e-8, "reltol": 1e-8, "feastol": 1e-9, "maxiters": 100},
    {"abstol": 1e-7, "reltol": 1e-6, "feastol": 1e-7, "maxiters": 100},
)


@dataclass
class BackendResult:
    status: str          # "optimal", "infeasible", "unknown", "failed"
    x: np.ndarray | None
    violation: float
    iterations: int
    raw_status: str


def solve_cvxopt(system: ConstraintSystem, options: dict | None = None,
                 accept: float = 0.0) -> BackendResult:
    """Solve ``min c^T x`` s.t. every LMI is PSD and every equality holds.

    cvxopt's form is ``Gs x + s = hs, s >= 0``; an LMI ``C0 + sum x_i C_i >= 0``
    maps to ``hs = C0`` and column ``i`` of ``Gs`` equal to ``-vec(C_i)``.
    """
    from cvxopt import matrix, solvers

    k = system.space.size
    c = np.zeros(k) if system.objective is None else np.asarray(system.objective, float)
    Gs, hs = [], []
    for lmi in system.lmis:
        expr = lmi.shifted()
        r = expr.shape[0]
        const = 0.5 * (expr.const + expr.const.T)
        coef = 0.5 * (expr.coef + expr.coef.transpose(0, 2, 1))
        # column-major vec of each coefficient matrix
        G = -coef.transpose(0, 2, 1).reshape(k, r * r).T
        Gs.append(matrix(np.ascontiguousarray(G)))
        hs.append(matrix(np.ascontiguousarray(const)))
    kwargs = {}
    if system.equalities:
        rows, rhs = [], []
        for _, expr in system.equalities:
            rows.append(expr.coef.reshape(k, -1).T)
            rhs.append(-expr.const.reshape(-1))
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        # drop structurally zero rows (cvxopt needs full row rank)
        keep = np.any(np.abs(A) > 0, axis=1)
        if np.any(~keep & (np.abs(b) > 0)):
            return BackendResult("infeasible", None, np.inf, 0, "inconsistent equalities")
        kwargs["A"] = matrix(np.ascontiguousarray(A[keep]))
        kwargs["b"] = matrix(np.ascontiguousarray(b[keep]))
    best = None
    ladder = [dict(options)] if options else [dict(t) for t in TOLERANCE_LADDER]
    for opts in ladder:
        opts.setdefault("show_progress", False)
        res = _run(system, solvers.sdp, matrix(c), Gs, hs, opts, kwargs)
        if res.raw_status == "primal infeasible":
            return res
        if best is None or res.violation < best.violation:
            best = res
        if res.status == "optimal" and res.violation <= accept:
            break
    return best


def _run(system, sdp, c, Gs, hs, opts, kwargs) -> BackendResult:
    try:
        sol = sdp(c, Gs=Gs, hs=hs, options=opts, **kwargs)
    except (ValueError, ArithmeticError) as exc:
        return BackendResult("failed", None, np.inf, 0, f"error: {exc}")
    raw = sol["status"]
    iters = int(sol.get("iterations", 0) or 0)
    x = None if sol["x"] is None else np.array(sol["x"]).ravel()
    if raw == "primal infeasible":
        return BackendResult("infeasible", x, np.inf, iters, raw)
    if x is None or not np.all(np.isfinite(x)):
        return BackendResult("failed", None, np.inf, iters, raw)
    viol = system.violation(x)
    status = "optimal" if raw == "optimal" else "unknown"
    return BackendResult(status, x, viol, iters, raw)


BACKENDS = {"cvxopt": solve_cvxopt}


def solve_system(system: ConstraintSystem, backend: str = "cvxopt", options: dict | None = None,
                 accept: float = 0.0) -> BackendResult:
    """Run ``backend``; ``accept`` is the constraint violation deemed good enough to stop retrying."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown SDP backend {backend!r}; available: {sorted(BACKENDS)}")
    return BACKENDS[backend](system, options, accept)
