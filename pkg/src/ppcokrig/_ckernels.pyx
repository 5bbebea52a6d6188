# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Matérn product correlation and per-column profile
reductions. Signatures mirror ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()


cdef inline double _matern(double u, int code) noexcept nogil:
    cdef double t
    if code == 0:
        return exp(-u)
    elif code == 1:
        t = sqrt(3.0) * u
        return (1.0 + t) * exp(-t)
    t = sqrt(5.0) * u
    return (1.0 + t + t * t / 3.0) * exp(-t)


def corr_matrix(const double[:, ::1] A, const double[:, ::1] B, const double[::1] phis, double nu):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef int code = 0 if nu == 0.5 else (1 if nu == 1.5 else 2)
    cdef double acc
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] inv = np.empty(d, dtype=np.float64)
    for k in range(d):
        inv[k] = 1.0 / phis[k]
    with nogil:
        for i in range(m):
            for j in range(n):
                acc = 1.0
                for k in range(d):
                    acc = acc * _matern(fabs(A[i, k] - B[j, k]) * inv[k], code)
                o[i, j] = acc
    return out


def profile_columns(const double[:, ::1] Yp, Wp):
    cdef Py_ssize_t n = Yp.shape[0], N = Yp.shape[1]
    cdef Py_ssize_t i, j
    cdef double r
    s2 = np.zeros(N, dtype=np.float64)
    cdef double[::1] s = s2
    cdef const double[:, ::1] W
    cdef double[::1] a, c
    if Wp is None:
        with nogil:
            for i in range(n):
                for j in range(N):
                    s[j] += Yp[i, j] * Yp[i, j]
        return None, None, s2
    W = np.ascontiguousarray(Wp, dtype=np.float64)
    wqw = np.zeros(N, dtype=np.float64)
    coef = np.zeros(N, dtype=np.float64)
    a = wqw
    c = coef
    with nogil:
        for i in range(n):
            for j in range(N):
                a[j] += W[i, j] * W[i, j]
                c[j] += W[i, j] * Yp[i, j]
        for j in range(N):
            c[j] = c[j] / a[j]
        for i in range(n):
            for j in range(N):
                r = Yp[i, j] - c[j] * W[i, j]
                s[j] += r * r
    return wqw, coef, s2
