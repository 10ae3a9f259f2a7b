"""Affine matrix-valued expressions over a flat decision vector.

An :class:`AffineExpr` is ``C0 + sum_i x_i C_i`` stored as a constant matrix
and a ``(k, rows, cols)`` coefficient stack.  Constraints built from them are
solver independent; :mod:`lurecons.lmi.backend` maps them to an SDP solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AffineExpr:
    __array_ufunc__ = None  # make ``ndarray @ expr`` defer to __rmatmul__

    def __init__(self, const: np.ndarray, coef: np.ndarray):
        const = np.atleast_2d(np.asarray(const, dtype=float))
        coef = np.asarray(coef, dtype=float)
        if coef.shape[1:] != const.shape:
            raise ValueError(f"coefficient stack {coef.shape} does not match constant {const.shape}")
        self.const = const
        self.coef = coef

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def nvars(self) -> int:
        return self.coef.shape[0]

    @classmethod
    def constant(cls, value, nvars: int) -> "AffineExpr":
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(value, np.zeros((nvars,) + value.shape))

    def _lift(self, other) -> "AffineExpr":
        if isinstance(other, AffineExpr):
            if other.nvars != self.nvars:
                raise ValueError("expressions belong to different variable spaces")
            return other
        other = np.asarray(other, dtype=float)
        if other.ndim == 0:
            other = other * np.ones(self.shape)
        return AffineExpr.constant(other, self.nvars)

    def __add__(self, other):
        o = self._lift(other)
        return AffineExpr(self.const + o.const, self.coef + o.coef)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return AffineExpr(self.const - o.const, self.coef - o.coef)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return AffineExpr(-self.const, -self.coef)

    def __mul__(self, scalar):
        s = float(scalar)
        return AffineExpr(s * self.const, s * self.coef)

    __rmul__ = __mul__

    def __matmul__(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return AffineExpr(self.const @ C, self.coef @ C)

    def __rmatmul__(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return AffineExpr(C @ self.const, np.matmul(C, self.coef))

    @property
    def T(self) -> "AffineExpr":
        return AffineExpr(self.const.T, self.coef.transpose(0, 2, 1))

    def sym(self) -> "AffineExpr":
        """``M + M^T``."""
        return self + self.T

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.const + np.tensordot(np.asarray(x, dtype=float), self.coef, axes=1)

    @staticmethod
    def block(rows: list[list]) -> "AffineExpr":
        nvars = next(e.nvars for row in rows for e in row if isinstance(e, AffineExpr))
        lifted = [[e if isinstance(e, AffineExpr) else AffineExpr.constant(e, nvars) for e in row]
                  for row in rows]
        const = np.block([[e.const for e in row] for row in lifted])
        coef = np.concatenate([np.concatenate([e.coef for e in row], axis=2) for row in lifted], axis=1)
        return AffineExpr(const, coef)


@dataclass
class VariableSpace:
    """Registry of named matrix variables mapped into one flat vector."""

    blocks: dict = field(default_factory=dict)
    size: int = 0

    def add(self, name: str, shape: tuple[int, int], structure: str = "full") -> None:
        r, c = shape
        if structure in ("symmetric", "diagonal") and r != c:
            raise ValueError(f"{structure} variable {name} must be square")
        basis = []
        if structure == "full":
            for i in range(r):
                for j in range(c):
                    B = np.zeros(shape)
                    B[i, j] = 1.0
                    basis.append(B)
        elif structure == "symmetric":
            for i in range(r):
                for j in range(i, c):
                    B = np.zeros(shape)
                    B[i, j] = B[j, i] = 1.0
                    basis.append(B)
        elif structure == "diagonal":
            for i in range(r):
                B = np.zeros(shape)
                B[i, i] = 1.0
                basis.append(B)
        else:
            raise ValueError(f"unknown structure {structure!r}")
        self.blocks[name] = (self.size, np.array(basis).reshape(len(basis), r, c), structure)
        self.size += len(basis)

    def expr(self, name: str) -> AffineExpr:
        start, basis, _ = self.blocks[name]
        coef = np.zeros((self.size,) + basis.shape[1:])
        coef[start:start + len(basis)] = basis
        return AffineExpr(np.zeros(basis.shape[1:]), coef)

    def value(self, name: str, x: np.ndarray) -> np.ndarray:
        start, basis, _ = self.blocks[name]
        return np.tensordot(np.asarray(x)[start:start + len(basis)], basis, axes=1)

    def constant(self, value) -> AffineExpr:
        return AffineExpr.constant(value, self.size)


def trace(expr: AffineExpr) -> AffineExpr:
    return AffineExpr(np.trace(expr.const).reshape(1, 1),
                      np.trace(expr.coef, axis1=1, axis2=2).reshape(-1, 1, 1))


@dataclass
class LMI:
    """``expr >= margin * I`` in the semidefinite order."""

    name: str
    expr: AffineExpr
    margin: float = 0.0

    def shifted(self) -> AffineExpr:
        return self.expr - self.margin * np.eye(self.expr.shape[0])

    def value(self, x) -> np.ndarray:
        v = self.expr.value(x)
        return 0.5 * (v + v.T)

    def min_eig(self, x) -> float:
        return float(np.linalg.eigvalsh(self.value(x))[0])


@dataclass
class ConstraintSystem:
    space: VariableSpace
    lmis: list = field(default_factory=list)
    equalities: list = field(default_factory=list)
    objective: np.ndarray | None = None

    def psd(self, name: str, expr: AffineExpr, margin: float = 0.0) -> None:
        """Require ``expr >= margin * I``."""
        if expr.shape[0] != expr.shape[1]:
            raise ValueError(f"LMI {name} is not square: {expr.shape}")
        self.lmis.append(LMI(name, expr, margin))

    def nsd(self, name: str, expr: AffineExpr, margin: float = 0.0) -> None:
        """Require ``expr <= -margin * I``."""
        self.psd(name, -expr, margin)

    def equal(self, name: str, expr: AffineExpr) -> None:
        self.equalities.append((name, expr))

    def minimize(self, expr: AffineExpr) -> None:
        if expr.shape != (1, 1):
            raise ValueError("objective must be scalar")
        self.objective = expr.coef[:, 0, 0].copy()

    def violation(self, x) -> float:
        """Largest amount by which any LMI (margin included) or equality is violated."""
        worst = 0.0
        for lmi in self.lmis:
            worst = max(worst, lmi.margin - lmi.min_eig(x))
        for _, expr in self.equalities:
            worst = max(worst, float(np.max(np.abs(expr.value(x)))))
        return worst
