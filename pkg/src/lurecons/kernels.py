"""Kernel selection: the compiled RK4 when it was built, numpy otherwise.

Set ``LURECONS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _rk4_py

BACKEND = "python"
rk4_lure = _rk4_py.rk4_lure

if os.environ.get("LURECONS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._rk4 import rk4_lure  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def available_backends():
    out = {"python": _rk4_py.rk4_lure}
    try:
        from ._rk4 import rk4_lure as compiled
        out["cython"] = compiled
    except ImportError:
        pass
    return out


def integrate_lure(F, G, H, bank, x0, h, steps, blowup=1e12, backend=None):
    """RK4 trajectory of ``s' = F s + G Phi(H s)`` on ``steps + 1`` samples.

    Returns ``(trajectory, completed_steps)``.
    """
    import numpy as np

    fn = rk4_lure if backend is None else available_backends()[backend]
    pb = bank.packed
    as_c = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    as_i = lambda a: np.ascontiguousarray(a, dtype=np.int32)  # noqa: E731
    F, G, H = as_c(F), as_c(G), as_c(H)
    return fn(F, G, H, as_i(pb.kinds), as_c(pb.params), as_i(pb.tab_start), as_i(pb.tab_len),
              as_c(pb.tab_x) if len(pb.tab_x) else np.zeros(1), as_c(pb.tab_y) if len(pb.tab_y) else np.zeros(1),
              as_c(x0), float(h), int(steps), float(blowup))
