# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched adaptive Simpson for G and cyclic Jacobi.

Semantics match :mod:`shadownet._fallback` to rounding.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()

cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline double _g_integrand(double a, double y, double sigma) noexcept nogil:
    cdef double d = a - y
    cdef double u = y / sigma
    return d * d * INV_SQRT_2PI / sigma * exp(-0.5 * u * u)


cdef double _simpson_rec(double a, double sigma, double lo, double hi, double eps,
                         double whole, double flo, double fmid, double fhi,
                         int depth) noexcept nogil:
    cdef double mid = 0.5 * (lo + hi)
    cdef double lm = 0.5 * (lo + mid)
    cdef double rm = 0.5 * (mid + hi)
    cdef double flm = _g_integrand(a, lm, sigma)
    cdef double frm = _g_integrand(a, rm, sigma)
    cdef double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
    cdef double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
    cdef double delta = left + right - whole
    if depth <= 0 or fabs(delta) <= 15.0 * eps:
        return left + right + delta / 15.0
    return (_simpson_rec(a, sigma, lo, mid, 0.5 * eps, left, flo, flm, fmid, depth - 1)
            + _simpson_rec(a, sigma, mid, hi, 0.5 * eps, right, fmid, frm, fhi, depth - 1))


def quad_g_batch(a_values, double sigma, double tol=1e-10, int max_depth=40):
    """G(a) = int_0^a (a - y)^2 phi_sigma(y) dy for each a, signed for a < 0."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = np.ascontiguousarray(a_values, dtype=np.float64).ravel()
    cdef Py_ssize_t n = a_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef double[::1] av = a_arr
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double a, lo, hi, flo, fhi, fmid, whole
    with nogil:
        for i in range(n):
            a = av[i]
            if a == 0.0:
                continue
            lo = a if a < 0.0 else 0.0
            hi = 0.0 if a < 0.0 else a
            flo = _g_integrand(a, lo, sigma)
            fhi = _g_integrand(a, hi, sigma)
            fmid = _g_integrand(a, 0.5 * (lo + hi), sigma)
            whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
            ov[i] = _simpson_rec(a, sigma, lo, hi, tol, whole, flo, fmid, fhi, max_depth)
            if a < 0.0:
                ov[i] = -ov[i]
    return np.asarray(out).reshape(np.shape(a_values))


def jacobi_sweeps(A, long[:, :, ::1] schedule, double tol, int max_sweeps):
    """Diagonalize symmetric A with cyclic Jacobi rotations.

    Rotations of one round act on disjoint pairs, so all of them are
    computed first and then applied as a row pass and a column pass,
    both of which walk memory contiguously. Returns (diagonal, sweeps, converged).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] M = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = M
    cdef Py_ssize_t n = M.shape[0]
    cdef Py_ssize_t rounds = schedule.shape[0], width = schedule.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cs_arr = np.zeros(width), sn_arr = np.zeros(width)
    cdef double[::1] cs = cs_arr
    cdef double[::1] sn = sn_arr
    cdef Py_ssize_t r, w, k, p, q
    cdef int sweep = 0
    cdef double apq, theta, t, c, s, x, y, off, frob
    cdef bint converged = False
    with nogil:
        frob = 0.0
        for p in range(n):
            for q in range(n):
                frob = frob + a[p, q] * a[p, q]
        frob = sqrt(frob)
        while True:
            off = 0.0
            for p in range(n):
                for q in range(n):
                    if p != q:
                        off = off + a[p, q] * a[p, q]
            if sqrt(off) <= tol * frob:
                converged = True
                break
            if sweep >= max_sweeps:
                break
            for r in range(rounds):
                for w in range(width):
                    cs[w] = 1.0
                    sn[w] = 0.0
                    p = schedule[r, w, 0]
                    q = schedule[r, w, 1]
                    if p < 0:
                        continue
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    cs[w] = 1.0 / sqrt(t * t + 1.0)
                    sn[w] = t * cs[w]
                # rows: A <- J^T A
                for w in range(width):
                    p = schedule[r, w, 0]
                    q = schedule[r, w, 1]
                    if p < 0 or sn[w] == 0.0:
                        continue
                    c = cs[w]
                    s = sn[w]
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                # columns: A <- A J, one row at a time
                for k in range(n):
                    for w in range(width):
                        p = schedule[r, w, 0]
                        q = schedule[r, w, 1]
                        if p < 0 or sn[w] == 0.0:
                            continue
                        c = cs[w]
                        s = sn[w]
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                for w in range(width):
                    p = schedule[r, w, 0]
                    q = schedule[r, w, 1]
                    if p >= 0 and sn[w] != 0.0:
                        a[p, q] = 0.0
                        a[q, p] = 0.0
            sweep += 1
    return np.diagonal(M).copy(), sweep, bool(converged)
