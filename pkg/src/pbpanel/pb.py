"""Pooled Bewley estimator of the long-run coefficients and its variance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .panel import (
    PanelDataset,
    PanelError,
    PooledSingularityError,
    SingularInstrumentsError,
    build_instruments,
    lagged_design,
)

_STATUS_TEXT = {
    kernels.SINGULAR_H: "singular instruments",
    kernels.SINGULAR_INNER: "singular projected differences",
    kernels.TOO_SHORT: "too few observations",
}


@dataclass(frozen=True)
class BewleyMoments:
    """Per-unit annihilated data for one panel.

    ``Wt`` holds the demeaned ``(X, y)`` on the packed effective sample and
    ``MW`` the same columns premultiplied by each unit's annihilator ``M_i``.
    ``S[i] = Wt_i' MW_i`` is the (k+1)x(k+1) moment matrix of unit ``i``.
    """

    Wt: np.ndarray
    MW: np.ndarray
    offsets: np.ndarray
    S: np.ndarray

    @property
    def T_eff(self) -> np.ndarray:
        return np.diff(self.offsets)


def bewley_moments(panel: PanelDataset, order: int = 1) -> BewleyMoments:
    Wt, MW, status = kernels.bewley_project(panel.y, panel.X, panel.offsets, order)
    bad = np.flatnonzero(status)
    if bad.size:
        detail = ", ".join(f"{panel.unit_ids[i]} ({_STATUS_TEXT[int(status[i])]})" for i in bad)
        raise SingularInstrumentsError(
            f"rank check failed for units: {detail}", [panel.unit_ids[i] for i in bad]
        )
    offsets = panel.offsets - order * np.arange(panel.n + 1)
    prod = Wt[:, :, None] * MW[:, None, :]
    S = np.add.reduceat(prod, offsets[:-1], axis=0)
    S = 0.5 * (S + S.transpose(0, 2, 1))
    return BewleyMoments(Wt, MW, offsets, S)


def _solve_pooled(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(A)) or 1.0 / np.linalg.cond(A) < 1e-12:
        raise PooledSingularityError(f"{what}: pooled moment matrix is singular")
    return np.linalg.solve(A, b)


def beta_from_moments(mom: BewleyMoments) -> np.ndarray:
    k = mom.S.shape[1] - 1
    Sxx = mom.S[:, :k, :k].sum(axis=0)
    Sxy = mom.S[:, :k, k].sum(axis=0)
    return _solve_pooled(Sxx, Sxy, "PB")


def variance_from_moments(mom: BewleyMoments, beta: np.ndarray):
    """``(omega_x, omega_v, cov)`` for a given coefficient vector."""
    k = mom.S.shape[1] - 1
    T = mom.T_eff.astype(float)
    Sxx = mom.S[:, :k, :k]
    Sxy = mom.S[:, :k, k]
    omega_x = (Sxx / (T**2)[:, None, None]).mean(axis=0)
    g = (Sxy - Sxx @ beta) / T[:, None]
    omega_v = (g[:, :, None] * g[:, None, :]).mean(axis=0)
    return omega_x, omega_v, sandwich(omega_x, omega_v)


def sandwich(omega_x: np.ndarray, omega_v: np.ndarray) -> np.ndarray:
    if 1.0 / np.linalg.cond(omega_x) < 1e-12:
        raise PooledSingularityError("omega_x is singular")
    inv = np.linalg.inv(omega_x)
    cov = inv @ omega_v @ inv
    return 0.5 * (cov + cov.T)


def standard_errors(cov: np.ndarray, n: int, T_bar: float) -> np.ndarray:
    """``sqrt(diag(cov)) / (T sqrt(n))`` for a ``T sqrt(n)``-consistent estimator."""
    return np.sqrt(np.clip(np.diag(cov), 0.0, None)) / (T_bar * np.sqrt(n))


@dataclass(frozen=True)
class UnitParams:
    unit_id: str
    alpha: float
    delta: np.ndarray
    c: float
    psi: np.ndarray


@dataclass(frozen=True)
class PbResult:
    beta_hat: np.ndarray
    omega_x_hat: np.ndarray
    omega_v_hat: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    n: int
    T_bar: float
    order: int = 1
    per_unit: list[UnitParams] = field(default_factory=list, repr=False)


def ardl_to_bewley(alpha: float, delta, beta=0.0) -> np.ndarray:
    """Map error-correction parameters to the Bewley coefficients on ``(dy, dX)``.

    Rewriting ``dy = c - alpha (y_{-1} - beta'x_{-1}) + delta'dx`` on levels
    gives coefficients ``-(1-alpha)/alpha`` on ``dy`` and ``delta/alpha - beta``
    on ``dx``; the default ``beta=0`` returns ``delta/alpha``.
    """
    if alpha == 0:
        raise ValueError("adjustment speed alpha must be nonzero")
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return np.concatenate([[-(1.0 - alpha) / alpha], delta / alpha - beta])


def bewley_to_ardl(psi, beta=0.0) -> tuple[float, np.ndarray]:
    """Inverse of :func:`ardl_to_bewley`."""
    psi = np.asarray(psi, dtype=float)
    alpha = 1.0 / (1.0 - psi[0])
    return alpha, (psi[1:] + beta) * alpha


def unit_parameters(panel: PanelDataset, beta: np.ndarray, order: int = 1) -> list[UnitParams]:
    """Recover the short-run parameters of each unit given the pooled long-run vector."""
    out = []
    k = panel.k
    for u in panel.units:
        ins = build_instruments(u, order)
        H, dZ = ins.H_tilde, ins.dZ_tilde
        r = ins.y_tilde - ins.X_tilde @ beta
        PdZ = H @ np.linalg.lstsq(H, dZ, rcond=None)[0]
        psi = np.linalg.solve(PdZ.T @ dZ, PdZ.T @ r)
        # intercept of the Bewley regression equals c / alpha
        _, dZ_raw, W_raw = lagged_design(u.y, u.X, order)
        level = np.mean(W_raw[:, k] - W_raw[:, :k] @ beta - dZ_raw @ psi)
        if order == 1 and psi[0] != 1.0:
            alpha, delta = bewley_to_ardl(psi, beta)
        else:
            alpha, delta = np.nan, np.full(k, np.nan)
        out.append(UnitParams(u.unit_id, float(alpha), delta, float(alpha * level), psi))
    return out


def pb_estimate(panel: PanelDataset, order: int = 1, per_unit: bool = True) -> PbResult:
    """Pooled Bewley estimate of the long-run coefficient vector.

    Parameters
    ----------
    panel : PanelDataset
        Level data; one leading observation per unit (``order`` in general)
        is consumed by lags and differences.
    order : int
        ARDL lag order. Order ``p`` adds ``p-1`` lags of the differences to
        the Bewley regression and ``p-1`` deeper level lags to the instruments.
    per_unit : bool
        Also recover ``(alpha_i, delta_i, c_i, psi_i)`` for each unit.
    """
    mom = bewley_moments(panel, order)
    beta = beta_from_moments(mom)
    omega_x, omega_v, cov = variance_from_moments(mom, beta)
    T_bar = float(mom.T_eff.mean())
    se = standard_errors(cov, panel.n, T_bar)
    units = unit_parameters(panel, beta, order) if per_unit else []
    return PbResult(beta, omega_x, omega_v, cov, se, panel.n, T_bar, order, units)


def pb_variance(panel: PanelDataset, beta_hat, order: int = 1):
    """Variance components ``(omega_x, omega_v, cov)`` evaluated at ``beta_hat``."""
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    if not np.all(np.isfinite(beta_hat)):
        raise PanelError("beta_hat must be finite")
    return variance_from_moments(bewley_moments(panel, order), beta_hat)
