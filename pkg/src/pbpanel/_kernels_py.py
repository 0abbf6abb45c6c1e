"""Pure numpy implementations of the hot kernels.

Signatures and outputs match the compiled ``_kernels`` module exactly; this
module is used when the extension is unavailable or when
``PBPANEL_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.signal

from .panel import lagged_design

# status codes shared with the compiled kernel
OK, SINGULAR_H, SINGULAR_INNER, TOO_SHORT = 0, 1, 2, 3


def _orthonormal_basis(A, rtol):
    q, r, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0 or d[-1] <= rtol * d[0]:
        return None
    return q


def bewley_project(y, X, offsets, order, rcond=1e-10):
    """Per-unit demeaned ``W = (X, y)`` and its annihilated version ``M W``.

    Rows are packed on the effective sample, unit ``i`` occupying
    ``offsets[i] - i*order`` to ``offsets[i+1] - (i+1)*order``.
    """
    n = offsets.shape[0] - 1
    k = X.shape[1]
    eff = offsets - order * np.arange(n + 1)
    Wt = np.zeros((eff[-1], k + 1))
    MW = np.zeros((eff[-1], k + 1))
    status = np.zeros(n, dtype=np.int8)
    n_h = order + k * (order + 1)
    inner_tol = np.sqrt(rcond)
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        if b - a - order < n_h + 1:
            status[i] = TOO_SHORT
            continue
        H, dZ, W = lagged_design(y[a:b], X[a:b], order)
        H = H - H.mean(axis=0)
        dZ = dZ - dZ.mean(axis=0)
        W = W - W.mean(axis=0)
        Wt[eff[i]: eff[i + 1]] = W
        Q = _orthonormal_basis(H, rcond)
        if Q is None:
            status[i] = SINGULAR_H
            continue
        QW = Q.T @ W
        Qc = _orthonormal_basis(Q.T @ dZ, inner_tol)
        if Qc is None:
            status[i] = SINGULAR_INNER
            continue
        MW[eff[i]: eff[i + 1]] = Q @ (QW - Qc @ (Qc.T @ QW))
    return Wt, MW, status


def regenerate(y0, x0, offsets, c, alpha, beta, uy, ux, signs, sidx):
    """Rebuild level series from sign-flipped residuals by the error-correction recursion.

    ``x_t = x_{t-1} + a_t ux_t`` and
    ``y_t = y_{t-1} + c - alpha (y_{t-1} - beta'x_{t-1}) + a_t uy_t``,
    started from the observed first levels ``y0``, ``x0``.
    """
    n = offsets.shape[0] - 1
    k = x0.shape[1]
    N = offsets[-1]
    y = np.empty(N)
    X = np.empty((N, k))
    a_all = signs[sidx]
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        e0, e1 = a - i, b - i - 1
        s = a_all[e0:e1]
        X[a] = x0[i]
        X[a + 1: b] = x0[i] + np.cumsum(s[:, None] * ux[e0:e1], axis=0)
        # equilibrium error xi_t = y_t - beta'x_t follows an AR(1)
        shock = c[i] + s * (uy[e0:e1] - ux[e0:e1] @ beta)
        xi = np.empty(b - a)
        xi[0] = y0[i] - x0[i] @ beta
        rho = 1.0 - alpha[i]
        xi[1:] = scipy.signal.lfilter([1.0], [1.0, -rho], shock, zi=[rho * xi[0]])[0]
        y[a:b] = xi + X[a:b] @ beta
    return y, X
