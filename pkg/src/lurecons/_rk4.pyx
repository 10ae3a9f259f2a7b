# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step RK4 for ``s' = F s + G phi(H s)``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

cdef enum:
    KIND_IDENTITY = 0
    KIND_SATURATION = 1
    KIND_GAIN = 2
    KIND_TABLE = 3


cdef inline double _table(double z, const double[::1] tx, const double[::1] ty, int s, int ln) nogil:
    cdef int lo, hi, mid
    if z <= tx[s]:
        return ty[s] + (ty[s + 1] - ty[s]) / (tx[s + 1] - tx[s]) * (z - tx[s])
    if z >= tx[s + ln - 1]:
        return ty[s + ln - 1] + (ty[s + ln - 1] - ty[s + ln - 2]) / (tx[s + ln - 1] - tx[s + ln - 2]) * (z - tx[s + ln - 1])
    lo = s
    hi = s + ln - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tx[mid] <= z:
            lo = mid
        else:
            hi = mid
    return ty[lo] + (ty[hi] - ty[lo]) * (z - tx[lo]) / (tx[hi] - tx[lo])


cdef void _rhs(const double[:, ::1] F, const double[:, ::1] G, const double[:, ::1] H,
               const int[::1] kinds, const double[::1] params,
               const int[::1] tab_start, const int[::1] tab_len,
               const double[::1] tx, const double[::1] ty,
               const double[::1] s, double[::1] z, double[::1] out) nogil:
    cdef Py_ssize_t d = F.shape[0]
    cdef Py_ssize_t p = H.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc, v, lim
    for i in range(p):
        acc = 0.0
        for j in range(d):
            acc += H[i, j] * s[j]
        if kinds[i] == KIND_SATURATION:
            lim = params[i]
            v = acc
            if v > lim:
                v = lim
            elif v < -lim:
                v = -lim
            z[i] = v
        elif kinds[i] == KIND_GAIN:
            z[i] = params[i] * acc
        elif kinds[i] == KIND_TABLE:
            z[i] = _table(acc, tx, ty, tab_start[i], tab_len[i])
        else:
            z[i] = acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += F[i, j] * s[j]
        for j in range(p):
            acc += G[i, j] * z[j]
        out[i] = acc


def rk4_lure(double[:, ::1] F, double[:, ::1] G, double[:, ::1] H,
             int[::1] kinds, double[::1] params, int[::1] tab_start, int[::1] tab_len,
             double[::1] tab_x, double[::1] tab_y,
             double[::1] x0, double h, Py_ssize_t steps, double blowup):
    """Integrate and return ``(trajectory, completed_steps)``.

    ``trajectory`` has ``steps + 1`` rows; rows past ``completed_steps`` are
    left as NaN when the state leaves ``|s| <= blowup``.
    """
    cdef Py_ssize_t d = F.shape[0]
    cdef Py_ssize_t p = H.shape[0]
    out_arr = np.full((steps + 1, d), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] s = np.array(x0, dtype=np.float64)
    cdef double[::1] tmp = np.empty(d)
    cdef double[::1] k1 = np.empty(d)
    cdef double[::1] k2 = np.empty(d)
    cdef double[::1] k3 = np.empty(d)
    cdef double[::1] k4 = np.empty(d)
    cdef double[::1] zbuf = np.empty(p if p > 0 else 1)
    cdef Py_ssize_t n, i
    cdef Py_ssize_t done = steps
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef bint bad
    with nogil:
        for i in range(d):
            out[0, i] = s[i]
        for n in range(steps):
            _rhs(F, G, H, kinds, params, tab_start, tab_len, tab_x, tab_y, s, zbuf, k1)
            for i in range(d):
                tmp[i] = s[i] + half * k1[i]
            _rhs(F, G, H, kinds, params, tab_start, tab_len, tab_x, tab_y, tmp, zbuf, k2)
            for i in range(d):
                tmp[i] = s[i] + half * k2[i]
            _rhs(F, G, H, kinds, params, tab_start, tab_len, tab_x, tab_y, tmp, zbuf, k3)
            for i in range(d):
                tmp[i] = s[i] + h * k3[i]
            _rhs(F, G, H, kinds, params, tab_start, tab_len, tab_x, tab_y, tmp, zbuf, k4)
            bad = False
            for i in range(d):
                s[i] = s[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(s[i]) or fabs(s[i]) > blowup:
                    bad = True
            if bad:
                done = n
                break
            for i in range(d):
                out[n + 1, i] = s[i]
    return out_arr, done
