"""Independent reference computations used by several test modules."""

import numpy as np

K_STEP = 1e-3


def scalar_schur_value(a, eps, lam, s1, s2, K, Z):
    """Scalar synthesis inequality after the Schur step, with X = 1 and Y = K.

    The synthesis program is homogeneous in (X, Y, Z, W), so X = 1 loses
    nothing; W only has to dominate 1/Z and drops out.
    """
    d = s2 - s1
    off = lam * K - d * Z
    return 2 * a + eps + 2 * s2 * lam * K + off * off / (2 * Z)


def scalar_feasible_grid(a, eps, lambdas, s1, s2, k_grid=None, z_grid=None):
    """Brute force: K feasible iff some Z > 0 makes every eigenvalue's value <= 0."""
    if k_grid is None:
        k_grid = np.round(np.arange(-10.0, 0.0 + K_STEP / 2, K_STEP), 12)
    if z_grid is None:
        z_grid = np.geomspace(1e-6, 1e3, 4000)
    K = k_grid[:, None]
    Z = z_grid[None, :]
    worst = np.max([scalar_schur_value(a, eps, lam, s1, s2, K, Z) for lam in lambdas], axis=0)
    return k_grid, np.min(worst, axis=1) <= 0.0


def scalar_boundary(a, eps, lambdas, s1, s2):
    """Largest feasible K on the grid (feasible sets are down-closed in K here)."""
    ks, ok = scalar_feasible_grid(a, eps, lambdas, s1, s2)
    if not ok.any():
        return None
    return float(ks[ok].max())
