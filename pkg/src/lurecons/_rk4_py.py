"""Pure numpy fallback for :mod:`lurecons._rk4` with the same contract."""

import numpy as np

from .sector import PackedBank, apply_packed


def rk4_lure(F, G, H, kinds, params, tab_start, tab_len, tab_x, tab_y, x0, h, steps, blowup):
    pb = PackedBank(np.asarray(kinds), np.asarray(params), np.asarray(tab_start),
                    np.asarray(tab_len), np.asarray(tab_x), np.asarray(tab_y))
    F = np.asarray(F)
    G = np.asarray(G)
    H = np.asarray(H)

    def rhs(s):
        return F @ s + G @ apply_packed(pb, H @ s)

    out = np.full((steps + 1, F.shape[0]), np.nan)
    s = np.array(x0, dtype=float)
    out[0] = s
    for n in range(steps):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > blowup:
            return out, n
        out[n + 1] = s
    return out, steps
