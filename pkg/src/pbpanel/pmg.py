"""Pooled Mean Group estimator solved by iterating its concentrated first-order conditions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .panel import PanelDataset, PanelError, PooledSingularityError, demean
from .pb import standard_errors


@dataclass(frozen=True)
class PmgResult:
    beta_hat: np.ndarray
    phi_hat: np.ndarray
    sigma2_hat: np.ndarray
    omega_pmg: np.ndarray
    se: np.ndarray
    iterations: int
    converged: bool
    psd: bool = True


@dataclass(frozen=True)
class _UnitMoments:
    # cross products after projecting out (dX, 1); shapes (n,k,k), (n,k), (n,)
    xx: np.ndarray
    xy1: np.ndarray
    xdy: np.ndarray
    y1y1: np.ndarray
    y1dy: np.ndarray
    dydy: np.ndarray
    T: np.ndarray


def _residualize(D: np.ndarray, A: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(D, A, rcond=None)
    return A - D @ coef


def _unit_moments(panel: PanelDataset) -> _UnitMoments:
    n, k = panel.n, panel.k
    xx = np.empty((n, k, k))
    xy1 = np.empty((n, k))
    xdy = np.empty((n, k))
    y1y1 = np.empty(n)
    y1dy = np.empty(n)
    dydy = np.empty(n)
    T = panel.effective_lengths().astype(float)
    bad = []
    for i, u in enumerate(panel.units):
        dX = np.diff(u.X, axis=0)
        D = np.column_stack([dX, np.ones(u.T - 1)])
        if np.linalg.matrix_rank(D) < k + 1:
            bad.append(u.unit_id)
            continue
        cols = np.column_stack([u.X[1:], u.y[:-1], np.diff(u.y)])
        R = _residualize(D, cols)
        Xr, y1r, dyr = R[:, :k], R[:, k], R[:, k + 1]
        xx[i] = Xr.T @ Xr
        xy1[i] = Xr.T @ y1r
        xdy[i] = Xr.T @ dyr
        y1y1[i] = y1r @ y1r
        y1dy[i] = y1r @ dyr
        dydy[i] = dyr @ dyr
    if bad:
        raise PanelError(f"differenced regressors are rank deficient for units: {bad}")
    return _UnitMoments(xx, xy1, xdy, y1y1, y1dy, dydy, T)


def pooled_engle_granger(panel: PanelDataset) -> np.ndarray:
    """Pooled OLS of demeaned ``y`` on demeaned ``X`` over the effective sample."""
    k = panel.k
    A = np.zeros((k, k))
    b = np.zeros(k)
    for u in panel.units:
        Xt = demean(u.X[1:])
        yt = demean(u.y[1:])
        A += Xt.T @ Xt
        b += Xt.T @ yt
    if 1.0 / np.linalg.cond(A) < 1e-12:
        raise PooledSingularityError("pooled Engle-Granger moment matrix is singular")
    return np.linalg.solve(A, b)


def _phi_sigma(m: _UnitMoments, beta: np.ndarray):
    xi_xi = m.y1y1 - 2.0 * m.xy1 @ beta + np.einsum("j,ijk,k->i", beta, m.xx, beta)
    xi_dy = m.y1dy - m.xdy @ beta
    phi = xi_dy / xi_xi
    sigma2 = (m.dydy - phi * xi_dy) / m.T
    # exact fits leave sigma2 at rounding noise; a relative floor keeps the weights finite
    floor = np.finfo(float).eps * np.maximum(m.dydy / m.T, np.finfo(float).tiny)
    return phi, np.maximum(sigma2, floor)


def _beta_step(m: _UnitMoments, phi: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    A = np.einsum("i,ijk->jk", phi**2 / sigma2, m.xx)
    b = np.einsum("i,ij->j", phi / sigma2, m.xdy - phi[:, None] * m.xy1)
    if not np.all(np.isfinite(A)) or 1.0 / np.linalg.cond(A) < 1e-14:
        raise PooledSingularityError("PMG beta-step moment matrix is singular")
    return -np.linalg.solve(A, b)


def pmg_beta_step(panel: PanelDataset, phi, sigma2) -> np.ndarray:
    """Long-run coefficients given per-unit loadings and error variances."""
    return _beta_step(_unit_moments(panel), np.asarray(phi, float), np.asarray(sigma2, float))


def pmg_estimate(panel: PanelDataset, tol: float = 1e-4, max_iter: int = 1000) -> PmgResult:
    """Iterate the loading/variance step and the weighted beta step to a fixed point.

    ``phi_hat`` and ``sigma2_hat`` are the values that produced the returned
    ``beta_hat`` in the final beta step. Non-convergence is reported through
    ``converged`` rather than raised.
    """
    m = _unit_moments(panel)
    beta = pooled_engle_granger(panel)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        phi, sigma2 = _phi_sigma(m, beta)
        new = _beta_step(m, phi, sigma2)
        step = np.max(np.abs(new - beta))
        beta = new
        if step < tol:
            converged = True
            break
    omega, psd = _omega(m, phi, sigma2)
    se = _se(omega, panel.n, float(m.T.mean()))
    return PmgResult(beta, phi, sigma2, omega, se, it, converged, psd)


def _omega(m: _UnitMoments, phi, sigma2):
    r = m.xx / (m.T**2)[:, None, None]
    info = np.einsum("i,ijk->jk", -phi / sigma2, r) / phi.shape[0]
    omega = np.linalg.inv(info)
    omega = 0.5 * (omega + omega.T)
    psd = bool(np.all(np.linalg.eigvalsh(omega) >= 0.0))
    return omega, psd


def _se(omega, n, T_bar):
    d = np.diag(omega)
    with np.errstate(invalid="ignore"):
        return np.where(d >= 0, standard_errors(omega, n, T_bar), np.nan)


def pmg_variance(panel: PanelDataset, result: PmgResult):
    """``(omega_pmg, se)`` from the loadings and variances stored in ``result``."""
    if not result.converged:
        warnings.warn("PMG iterations did not converge; variance may be unreliable", stacklevel=2)
    m = _unit_moments(panel)
    omega, psd = _omega(m, result.phi_hat, result.sigma2_hat)
    if not psd:
        warnings.warn("PMG covariance is not positive semidefinite (wrong-signed loadings)",
                      stacklevel=2)
    return omega, _se(omega, panel.n, float(m.T.mean()))
