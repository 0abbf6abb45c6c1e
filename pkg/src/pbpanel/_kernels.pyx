# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the per-unit Bewley projection and the bootstrap recursion.

Outputs agree with ``_kernels_py`` to rounding error.
"""

import numpy as np

from libc.math cimport sqrt, fabs

cdef enum:
    OK = 0
    SINGULAR_H = 1
    SINGULAR_INNER = 2
    TOO_SHORT = 3


cdef inline double _dot(double[:, ::1] A, Py_ssize_t i, double[:, ::1] B, Py_ssize_t j,
                        Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t t
    cdef double s = 0.0
    for t in range(m):
        s += A[i, t] * B[j, t]
    return s


cdef int _orthonormalize(double[:, ::1] A, Py_ssize_t p, Py_ssize_t m, double rtol) noexcept nogil:
    # Modified Gram-Schmidt with one reorthogonalisation pass on the rows
    # A[0:p, 0:m]. Returns 1 when a row falls below rtol * largest row norm.
    cdef Py_ssize_t i, j, t, rep
    cdef double nrm, d, big = 0.0
    for j in range(p):
        nrm = sqrt(_dot(A, j, A, j, m))
        if nrm > big:
            big = nrm
    if big == 0.0:
        return 1
    for j in range(p):
        for rep in range(2):
            for i in range(j):
                d = _dot(A, i, A, j, m)
                for t in range(m):
                    A[j, t] -= d * A[i, t]
        nrm = sqrt(_dot(A, j, A, j, m))
        if nrm <= rtol * big:
            return 1
        for t in range(m):
            A[j, t] /= nrm
    return 0


cdef void _demean_rows(double[:, ::1] A, Py_ssize_t p, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j, t
    cdef double s
    for j in range(p):
        s = 0.0
        for t in range(m):
            s += A[j, t]
        s /= m
        for t in range(m):
            A[j, t] -= s


def bewley_project(const double[::1] y, const double[:, ::1] X, const long long[::1] offsets,
                   int order, double rcond=1e-10):
    """Per-unit demeaned ``W = (X, y)`` and ``M W`` on the packed effective sample."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t k = X.shape[1]
    cdef Py_ssize_t n_h = order + k * (order + 1)
    cdef Py_ssize_t n_d = (k + 1) * order
    cdef Py_ssize_t n_w = k + 1
    cdef Py_ssize_t i, j, l, t, m, a, e, lag, col, T
    cdef Py_ssize_t max_m = 0
    cdef double s, inner_tol = sqrt(rcond)

    for i in range(n):
        if offsets[i + 1] - offsets[i] - order > max_m:
            max_m = offsets[i + 1] - offsets[i] - order
    if max_m < 1:
        max_m = 1

    n_eff = offsets[n] - order * n
    Wt_arr = np.zeros((n_eff, n_w))
    MW_arr = np.zeros((n_eff, n_w))
    status_arr = np.zeros(n, dtype=np.int8)
    cdef double[:, ::1] Wt_out = Wt_arr
    cdef double[:, ::1] MW_out = MW_arr
    cdef signed char[::1] status = status_arr

    # row-major scratch: one row per column of the design
    cdef double[:, ::1] Hq = np.empty((n_h, max_m))
    cdef double[:, ::1] D = np.empty((n_d, max_m))
    cdef double[:, ::1] W = np.empty((n_w, max_m))
    cdef double[:, ::1] C = np.empty((n_d, n_h))     # rows: Q dZ_l
    cdef double[:, ::1] QW = np.empty((n_w, n_h))    # rows: Q W_c
    cdef double[::1] proj = np.empty(n_h)

    with nogil:
        for i in range(n):
            a = offsets[i]
            T = offsets[i + 1] - a
            m = T - order
            e = a - order * i
            if m < n_h + 1:
                status[i] = TOO_SHORT
                continue
            for t in range(m):
                # instruments: y lags, X, X lags
                for lag in range(1, order + 1):
                    Hq[lag - 1, t] = y[a + order + t - lag]
                for j in range(k):
                    Hq[order + j, t] = X[a + order + t, j]
                for lag in range(1, order + 1):
                    for j in range(k):
                        Hq[order + k * lag + j, t] = X[a + order + t - lag, j]
                # differences: (dy, dX) and their lags
                for lag in range(order):
                    col = lag * (k + 1)
                    D[col, t] = y[a + order + t - lag] - y[a + order + t - lag - 1]
                    for j in range(k):
                        D[col + 1 + j, t] = X[a + order + t - lag, j] - X[a + order + t - lag - 1, j]
                for j in range(k):
                    W[j, t] = X[a + order + t, j]
                W[k, t] = y[a + order + t]
            _demean_rows(Hq, n_h, m)
            _demean_rows(D, n_d, m)
            _demean_rows(W, n_w, m)
            for t in range(m):
                for j in range(n_w):
                    Wt_out[e + t, j] = W[j, t]
            if _orthonormalize(Hq, n_h, m, rcond):
                status[i] = SINGULAR_H
                continue
            for l in range(n_d):
                for j in range(n_h):
                    C[l, j] = _dot(D, l, Hq, j, m)
            for l in range(n_w):
                for j in range(n_h):
                    QW[l, j] = _dot(W, l, Hq, j, m)
            if _orthonormalize(C, n_d, n_h, inner_tol):
                status[i] = SINGULAR_INNER
                continue
            # QW <- (I - Qc'Qc) QW, column by column of W
            for l in range(n_w):
                for j in range(n_d):
                    s = 0.0
                    for col in range(n_h):
                        s += C[j, col] * QW[l, col]
                    proj[j] = s
                for col in range(n_h):
                    s = 0.0
                    for j in range(n_d):
                        s += C[j, col] * proj[j]
                    QW[l, col] -= s
            for t in range(m):
                for l in range(n_w):
                    s = 0.0
                    for j in range(n_h):
                        s += Hq[j, t] * QW[l, j]
                    MW_out[e + t, l] = s
    return Wt_arr, MW_arr, status_arr


def regenerate(const double[::1] y0, const double[:, ::1] x0, const long long[::1] offsets,
               const double[::1] c, const double[::1] alpha, const double[::1] beta,
               const double[::1] uy, const double[:, ::1] ux, const double[::1] signs,
               const long long[::1] sidx):
    """Rebuild level series from sign-flipped residuals by the error-correction recursion."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t k = x0.shape[1]
    cdef Py_ssize_t i, j, t, a, b, e
    cdef double s, xi
    y_arr = np.empty(offsets[n])
    X_arr = np.empty((offsets[n], k))
    cdef double[::1] yo = y_arr
    cdef double[:, ::1] Xo = X_arr
    with nogil:
        for i in range(n):
            a = offsets[i]
            b = offsets[i + 1]
            e = a - i
            yo[a] = y0[i]
            for j in range(k):
                Xo[a, j] = x0[i, j]
            for t in range(a + 1, b):
                s = signs[sidx[e + t - a - 1]]
                xi = yo[t - 1]
                for j in range(k):
                    xi -= beta[j] * Xo[t - 1, j]
                    Xo[t, j] = Xo[t - 1, j] + s * ux[e + t - a - 1, j]
                yo[t] = yo[t - 1] + c[i] - alpha[i] * xi + s * uy[e + t - a - 1]
    return y_arr, X_arr
