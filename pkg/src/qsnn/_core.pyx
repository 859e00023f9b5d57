# cython: language_level=3
"""Compiled kernels for the per-step neuron recurrence and bit-serial GEMM.

Arithmetic mirrors qsnn._fallback expression for expression; the extension
is built with -ffp-contract=off so the float sequence cannot fuse into FMA
and drift from the numpy path.
"""

from libc.math cimport floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fused_step(double[::1] v, double[::1] cur, long long[::1] levels,
               double inv_tau, double v_th, double v_rst,
               bint hard, long long level_cap):
    """In-place leak/integrate/fire/reset over flat arrays; see _fallback."""
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double u, lvl
    cdef double cap = <double> level_cap
    for i in range(n):
        u = v[i] * inv_tau + cur[i]
        if u > v_th:
            lvl = floor(u / v_th)
            if lvl > cap:
                lvl = cap
            levels[i] = <long long> lvl
            if hard:
                v[i] = v_rst
            else:
                v[i] = u - lvl * v_th
        else:
            levels[i] = 0
            v[i] = u


def bitserial_gemm(long long[:, ::1] w, long long[:, ::1] planes):
    """sum_t 2^t * (W @ plane_t) in exact int64; see _fallback."""
    cdef Py_ssize_t m = w.shape[0], k = w.shape[1], T = planes.shape[0]
    cdef Py_ssize_t i, j, t
    cdef long long acc, ps
    out_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] out = out_arr
    for i in range(m):
        acc = 0
        for t in range(T):
            ps = 0
            for j in range(k):
                if planes[t, j]:
                    ps += w[i, j]
            acc += ps << t
        out[i] = acc
    return out_arr
