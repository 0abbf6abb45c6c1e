"""Panel dynamic OLS and group-mean fully modified OLS, with a Bartlett long-run covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .panel import PanelDataset, PanelError, PooledSingularityError, demean


@dataclass(frozen=True)
class LongRunCovariance:
    omega: np.ndarray
    lam: np.ndarray
    bandwidth: int
    kernel: str = "bartlett"


@dataclass(frozen=True)
class CointRegResult:
    beta_hat: np.ndarray
    se: np.ndarray
    per_unit_beta: np.ndarray | None = None
    per_unit_t: np.ndarray | None = None
    leads_lags: tuple[int, int] | None = None


def auto_bandwidth(T: int) -> int:
    return int(math.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


def long_run_covariance(residuals, bandwidth="auto") -> LongRunCovariance:
    """Bartlett-kernel long-run covariance of the columns of ``residuals``.

    With ``G_j = T^{-1} sum_t e_{t-j} e_t'`` (lagged observation on the left),
    ``omega = G_0 + sum_j w_j (G_j + G_j')`` and the one-sided
    ``lam = G_0 + sum_j w_j G_j``, where ``w_j = 1 - j/(B+1)``. Columns are
    demeaned first.
    """
    e = np.asarray(residuals, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    T = e.shape[0]
    B = auto_bandwidth(T) if bandwidth in ("auto", None) else int(bandwidth)
    if B < 0 or B >= T:
        raise ValueError(f"bandwidth {B} must satisfy 0 <= bandwidth < T={T}")
    e = e - e.mean(axis=0)
    g0 = e.T @ e / T
    omega = g0.copy()
    lam = g0.copy()
    for j in range(1, B + 1):
        w = 1.0 - j / (B + 1.0)
        gj = e[:-j].T @ e[j:] / T
        omega += w * (gj + gj.T)
        lam += w * gj
    return LongRunCovariance(omega, lam, B)


def psd_clip(A: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def _pdols_blocks(u, leads: int, lags: int, differences: bool):
    """Per-unit levels and dynamic regressors on rows ``1+lags .. T-1-leads``."""
    T = u.T
    first, last = 1 + lags, T - 1 - leads
    X = u.X[first: last + 1]
    y = u.y[first: last + 1]
    cols = [np.ones(last - first + 1)]
    if differences:
        dX = np.diff(u.X, axis=0)  # dX[t-1] = X_t - X_{t-1}
        for j in range(-lags, leads + 1):
            cols.append(dX[first - 1 + j: last + j])
    return y, X, np.column_stack(cols)


def pdols_estimate(panel: PanelDataset, leads: int = 1, lags: int = 1,
                   bandwidth="auto", differences: bool = True) -> CointRegResult:
    """Pooled dynamic OLS with unit-specific intercepts and lead/lag coefficients.

    ``differences=False`` drops the differenced regressors, giving static
    pooled OLS with unit intercepts on the same rows.
    """
    k = panel.k
    need = k * (leads + lags + 1) + k + 2 if differences else k + 2
    short = [uid for uid, T in zip(panel.unit_ids, panel.lengths) if T - 1 - leads - lags < need]
    if short:
        raise PanelError(f"PDOLS effective sample too short (< {need}) for units: {short}")
    A = np.zeros((k, k))
    b = np.zeros(k)
    blocks = []
    for u in panel.units:
        y, X, D = _pdols_blocks(u, leads, lags, differences)
        coef, *_ = np.linalg.lstsq(D, np.column_stack([X, y]), rcond=None)
        R = np.column_stack([X, y]) - D @ coef
        Xr, yr = R[:, :k], R[:, k]
        A += Xr.T @ Xr
        b += Xr.T @ yr
        blocks.append((Xr, yr))
    if 1.0 / np.linalg.cond(A) < 1e-12:
        raise PooledSingularityError("PDOLS pooled moment matrix is singular")
    beta = np.linalg.solve(A, b)
    meat = np.zeros((k, k))
    for Xr, yr in blocks:
        lrv = long_run_covariance(yr - Xr @ beta, bandwidth).omega[0, 0]
        meat += max(lrv, 0.0) * (Xr.T @ Xr)
    Ainv = np.linalg.inv(A)
    V = Ainv @ meat @ Ainv
    return CointRegResult(beta, np.sqrt(np.diag(V)), leads_lags=(leads, lags))


def fmols_unit(y, X, bandwidth="auto"):
    """Fully modified OLS for one unit on its effective sample.

    Returns ``(beta, var)`` where ``var = omega_u.x (X~'X~)^{-1}`` is the
    conditional long-run variance scaled by the demeaned level moments.
    """
    dX = np.diff(X, axis=0)
    Xt = demean(X[1:])
    yt = demean(y[1:])
    T = yt.shape[0]
    XX = Xt.T @ Xt
    b_ols = np.linalg.solve(XX, Xt.T @ yt)
    u = yt - Xt @ b_ols
    lrc = long_run_covariance(np.column_stack([u, dX]), bandwidth)
    om = psd_clip(lrc.omega)
    lam = lrc.lam
    om_xx = om[1:, 1:]
    if np.linalg.matrix_rank(om_xx) < om_xx.shape[0] or np.any(np.diag(om_xx) <= 0):
        raise PanelError("zero long-run variance of the differenced regressors")
    gain = np.linalg.solve(om_xx, om[1:, 0])
    y_plus = yt - dX @ gain
    delta_plus = lam[1:, 0] - lam[1:, 1:] @ gain
    beta = np.linalg.solve(XX, Xt.T @ y_plus - T * delta_plus)
    om_ux = max(om[0, 0] - om[0, 1:] @ gain, 0.0)
    return beta, om_ux * np.linalg.inv(XX)


def fmols_group_mean(panel: PanelDataset, bandwidth="auto", beta0=None) -> CointRegResult:
    """Average of per-unit FMOLS estimates.

    ``se`` is the standard error of the average, ``sqrt(diag(sum_i V_i))/n``;
    ``per_unit_t`` holds the unit t-ratios against ``beta0`` (defaults to zero).
    """
    k = panel.k
    betas = np.empty((panel.n, k))
    var_sum = np.zeros((k, k))
    t = np.empty((panel.n, k))
    b0 = np.zeros(k) if beta0 is None else np.atleast_1d(beta0).astype(float)
    for i, u in enumerate(panel.units):
        try:
            betas[i], V = fmols_unit(u.y, u.X, bandwidth)
        except PanelError as err:
            raise PanelError(f"unit {u.unit_id}: {err}") from err
        var_sum += V
        with np.errstate(divide="ignore", invalid="ignore"):
            t[i] = (betas[i] - b0) / np.sqrt(np.diag(V))
    se = np.sqrt(np.diag(var_sum)) / panel.n
    return CointRegResult(betas.mean(axis=0), se, per_unit_beta=betas, per_unit_t=t)


def group_mean_t(result: CointRegResult) -> np.ndarray:
    """Group-mean t statistic ``n^{-1/2} sum_i t_i``."""
    t = result.per_unit_t
    return t.sum(axis=0) / np.sqrt(t.shape[0])
