# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the 1-D transport cost and log-domain Sinkhorn.

Every function here has a numpy twin in :mod:`geoaug._fallback` with the same
signature; :mod:`geoaug._backend` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()


cdef double _w2_cells(const double[::1] ma, const double[::1] mb) noexcept nogil:
    # Cells of width h centred on i*h, h = 1/(G-1); piecewise-uniform density
    # inside each cell, so both quantile functions are piecewise linear in q.
    cdef Py_ssize_t ga = ma.shape[0], gb = mb.shape[0]
    cdef double ha = 1.0 / (ga - 1), hb = 1.0 / (gb - 1)
    cdef double ta = 0.0, tb = 0.0
    cdef Py_ssize_t i, j
    for i in range(ga):
        ta += ma[i]
    for j in range(gb):
        tb += mb[j]
    cdef double ca_lo = 0.0, cb_lo = 0.0, ca_hi = 0.0, cb_hi = 0.0
    cdef double wa = 0.0, wb = 0.0, q = 0.0, qn, length, qm, d, s
    cdef double acc = 0.0
    i = -1
    j = -1
    while True:
        if ca_hi <= q:
            i += 1
            while i < ga and ma[i] <= 0.0:
                i += 1
            if i >= ga:
                break
            wa = ma[i] / ta
            ca_lo = ca_hi
            ca_hi = ca_lo + wa
        if cb_hi <= q:
            j += 1
            while j < gb and mb[j] <= 0.0:
                j += 1
            if j >= gb:
                break
            wb = mb[j] / tb
            cb_lo = cb_hi
            cb_hi = cb_lo + wb
        qn = ca_hi if ca_hi < cb_hi else cb_hi
        length = qn - q
        qm = 0.5 * (q + qn)
        d = ((i - 0.5) * ha + (qm - ca_lo) * ha / wa) - ((j - 0.5) * hb + (qm - cb_lo) * hb / wb)
        s = ha / wa - hb / wb
        acc += length * (d * d + s * s * length * length / 12.0)
        q = qn
    return acc


def w2_cells(double[::1] ma, double[::1] mb):
    """Squared 2-Wasserstein cost between two cell densities on [0, 1]."""
    return _w2_cells(ma, mb)


def pairwise_w2(double[:, :, ::1] a, double[:, :, ::1] b, double[::1] weights,
                Py_ssize_t row_start=0, Py_ssize_t row_stop=-1):
    """Weighted sum over leads of ``w2_cells`` for every (row, col) pair.

    ``a`` is (n, leads, Ga) and ``b`` is (m, leads, Gb). Rows
    ``row_start:row_stop`` are filled; the GIL is released so callers can
    split rows across threads.
    """
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], nl = a.shape[1]
    if row_stop < 0:
        row_stop = n
    out = np.zeros((row_stop - row_start, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, l
    cdef double acc
    with nogil:
        for i in range(row_start, row_stop):
            for j in range(m):
                acc = 0.0
                for l in range(nl):
                    acc += weights[l] * _w2_cells(a[i, l], b[j, l])
                o[i - row_start, j] = acc
    return out


cdef inline double _lse_row(const double[:, ::1] c, const double[::1] g,
                            Py_ssize_t i, double eps) noexcept nogil:
    cdef Py_ssize_t j, m = c.shape[1]
    cdef double mx = -INFINITY, v, s = 0.0
    for j in range(m):
        v = (g[j] - c[i, j]) / eps
        if v > mx:
            mx = v
    for j in range(m):
        s += exp((g[j] - c[i, j]) / eps - mx)
    return mx + log(s)


cdef inline double _lse_col(const double[:, ::1] c, const double[::1] f,
                            Py_ssize_t j, double eps) noexcept nogil:
    cdef Py_ssize_t i, n = c.shape[0]
    cdef double mx = -INFINITY, v, s = 0.0
    for i in range(n):
        v = (f[i] - c[i, j]) / eps
        if v > mx:
            mx = v
    for i in range(n):
        s += exp((f[i] - c[i, j]) / eps - mx)
    return mx + log(s)


def sinkhorn_log(double[:, ::1] cost, double[::1] a, double[::1] b, double eps,
                 double tol, Py_ssize_t max_iter, Py_ssize_t check_every):
    """Log-domain Sinkhorn on strictly positive marginals.

    Returns ``(f, g, n_iter, violation, checkpoints)`` where ``violation`` is
    the l1 row-marginal error measured right before the last ``f`` update
    (columns are exact after every ``g`` update).
    """
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    f_arr = np.zeros(n)
    g_arr = np.zeros(m)
    cdef double[::1] f = f_arr, g = g_arr
    cdef double[::1] loga = np.log(np.asarray(a)), logb = np.log(np.asarray(b))
    cdef Py_ssize_t it = 0, i, j
    cdef double viol = INFINITY, fi
    checkpoints = []
    with nogil:
        while it < max_iter:
            viol = 0.0
            for i in range(n):
                fi = eps * (loga[i] - _lse_row(cost, g, i, eps))
                if it > 0:
                    # current row sum = a_i * exp((f_old - f_new) / eps)
                    viol += fabs(a[i] * exp((f[i] - fi) / eps) - a[i])
                f[i] = fi
            for j in range(m):
                g[j] = eps * (logb[j] - _lse_col(cost, f, j, eps))
            it += 1
            if it > 1 and (it - 1) % check_every == 0:
                with gil:
                    checkpoints.append(viol)
            if it > 1 and viol < tol:
                break
    # measured after the final g update so the value matches the returned plan
    viol = _row_violation(cost, f, g, a, eps)
    return f_arr, g_arr, it, viol, checkpoints


cdef double _row_violation(const double[:, ::1] cost, const double[::1] f,
                           const double[::1] g, const double[::1] a, double eps):
    cdef Py_ssize_t i, n = cost.shape[0]
    cdef double v = 0.0
    for i in range(n):
        v += fabs(exp(f[i] / eps + _lse_row(cost, g, i, eps)) - a[i])
    return v
