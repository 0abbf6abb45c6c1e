"""Bias correction and bootstrap inference for the long-run coefficients.

Two corrections are available for every estimator: the split-panel jackknife
and a sieve wild bootstrap that resamples whole cross-sections of residuals
with a common Rademacher sign per period. Bootstrap draws also supply
critical values for the corrected estimators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import kernels
from .cointreg import fmols_group_mean, pdols_estimate
from .dgp import replication_rng
from .panel import PanelDataset, PanelError
from .pb import (
    BewleyMoments,
    beta_from_moments,
    bewley_moments,
    sandwich,
    standard_errors,
    variance_from_moments,
)
from .pmg import pmg_estimate

ESTIMATORS = ("pb", "pmg", "pdols", "fmols")


@dataclass(frozen=True)
class EstimatorOptions:
    """Tuning shared by the estimator registry; unused fields are ignored."""

    order: int = 1
    leads: int = 1
    lags: int = 1
    bandwidth: object = "auto"
    pmg_tol: float = 1e-4
    pmg_max_iter: int = 1000


_DEFAULT = EstimatorOptions()


def check_estimator(estimator: str) -> str:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    return estimator


def fit(panel: PanelDataset, estimator: str = "pb", options: EstimatorOptions | None = None):
    """``(beta_hat, se)`` from the named estimator."""
    o = options or _DEFAULT
    check_estimator(estimator)
    if estimator == "pb":
        mom = bewley_moments(panel, o.order)
        beta = beta_from_moments(mom)
        _, _, cov = variance_from_moments(mom, beta)
        return beta, standard_errors(cov, panel.n, float(mom.T_eff.mean()))
    if estimator == "pmg":
        res = pmg_estimate(panel, tol=o.pmg_tol, max_iter=o.pmg_max_iter)
        if not res.converged:
            raise PanelError("PMG iterations did not converge")
        return res.beta_hat, res.se
    if estimator == "pdols":
        res = pdols_estimate(panel, leads=o.leads, lags=o.lags, bandwidth=o.bandwidth)
        return res.beta_hat, res.se
    res = fmols_group_mean(panel, bandwidth=o.bandwidth)
    return res.beta_hat, res.se


# ---------------------------------------------------------------- jackknife

def jackknife_kappa(epsilon: float) -> float:
    """Half-panel weight removing a bias of order ``T**-epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return 1.0 / (2.0**epsilon - 1.0)


def split_halves(panel: PanelDataset, order: int = 1):
    """First and second half-panels, split on each unit's effective sample.

    The first half keeps the first ``floor(T_eff/2)`` effective periods and
    the second half the rest; each half carries its own ``order`` presample
    levels, so the two halves overlap by ``order`` level observations.
    """
    T = panel.lengths
    m = (T - order) // 2
    zero = np.zeros_like(T)
    return panel.window(zero, m + order), panel.window(m, T)


def jackknife_combine(beta_full, beta_a, beta_b, kappa: float) -> np.ndarray:
    return beta_full - kappa * (0.5 * (beta_a + beta_b) - beta_full)


@dataclass(frozen=True)
class CorrectedEstimate:
    beta_tilde: np.ndarray
    method: str
    kappa: float | None
    critical_value: np.ndarray
    ci: np.ndarray
    se: np.ndarray
    beta_hat: np.ndarray
    b_hat: np.ndarray | None = None


def _half_fit(half, which, estimator, options):
    try:
        return fit(half, estimator, options)
    except PanelError as err:
        raise PanelError(f"half-sample {which} estimation failed: {err}") from err


def _half_moments(half, which, order):
    try:
        return bewley_moments(half, order)
    except PanelError as err:
        raise PanelError(f"half-sample {which} estimation failed: {err}") from err


def _pb_jackknife(panel, kappa, order):
    """Jackknife PB estimate with its variance; returns ``(beta_tilde, se, cov, parts)``."""
    a, b = split_halves(panel, order)
    full = bewley_moments(panel, order)
    mom_a = _half_moments(a, "a", order)
    mom_b = _half_moments(b, "b", order)
    beta_full = beta_from_moments(full)
    beta_a = beta_from_moments(mom_a)
    beta_b = beta_from_moments(mom_b)
    beta_tilde = jackknife_combine(beta_full, beta_a, beta_b, kappa)
    omega_v, cov = _jackknife_cov(full, mom_a, mom_b, beta_tilde, kappa)
    se = standard_errors(cov, panel.n, float(full.T_eff.mean()))
    return beta_tilde, se, cov, (beta_full, beta_a, beta_b, omega_v)


def _jackknife_cov(full: BewleyMoments, mom_a: BewleyMoments, mom_b: BewleyMoments,
                   beta_tilde, kappa):
    k = full.S.shape[1] - 1
    eff = full.offsets
    T = full.T_eff.astype(float)
    vstar = full.MW[:, k] - full.MW[:, :k] @ beta_tilde
    m = mom_a.T_eff
    idx_a = np.concatenate([np.arange(eff[i], eff[i] + m[i]) for i in range(len(m))])
    idx_b = np.concatenate([np.arange(eff[i] + m[i], eff[i + 1]) for i in range(len(m))])
    q_full = np.add.reduceat(full.MW[:, :k] * vstar[:, None], eff[:-1], axis=0)
    q_a = np.add.reduceat(mom_a.MW[:, :k] * vstar[idx_a, None], mom_a.offsets[:-1], axis=0)
    q_b = np.add.reduceat(mom_b.MW[:, :k] * vstar[idx_b, None], mom_b.offsets[:-1], axis=0)
    g = ((1.0 + kappa) * q_full - 2.0 * kappa * (q_a + q_b)) / T[:, None]
    omega_v = (g[:, :, None] * g[:, None, :]).mean(axis=0)
    omega_x = (full.S[:, :k, :k] / (T**2)[:, None, None]).mean(axis=0)
    return omega_v, sandwich(omega_x, omega_v)


def jackknife_variance(panel: PanelDataset, beta_tilde, kappa: float, order: int = 1):
    """``(omega_v_tilde, cov)`` for the jackknife PB estimate ``beta_tilde``.

    The full-sample residual ``v* = M(y - X beta_tilde)`` is weighted by
    ``(1+kappa) X'M`` on the full sample and by ``-2 kappa X_h'M_h`` on the
    rows of each half ``h``; ``cov`` uses the full-sample ``omega_x``.
    """
    beta_tilde = np.atleast_1d(np.asarray(beta_tilde, dtype=float))
    a, b = split_halves(panel, order)
    return _jackknife_cov(bewley_moments(panel, order), _half_moments(a, "a", order),
                          _half_moments(b, "b", order), beta_tilde, kappa)


def jackknife_estimate(panel: PanelDataset, estimator: str, kappa: float,
                       options: EstimatorOptions | None = None):
    """``(beta_tilde, se, beta_full)`` of the jackknife-corrected estimator."""
    o = options or _DEFAULT
    if estimator == "pb":
        beta_tilde, se, _, parts = _pb_jackknife(panel, kappa, o.order)
        return beta_tilde, se, parts[0]
    a, b = split_halves(panel, o.order)
    beta_full, se = fit(panel, estimator, o)
    beta_a, _ = _half_fit(a, "a", estimator, o)
    beta_b, _ = _half_fit(b, "b", estimator, o)
    return jackknife_combine(beta_full, beta_a, beta_b, kappa), se, beta_full


def normal_critical_value(level: float = 0.05) -> float:
    return float(norm.ppf(1.0 - level / 2.0))


def jackknife_correct(panel: PanelDataset, estimator: str = "pb", epsilon: float = 2.0,
                      options: EstimatorOptions | None = None, critical_value=None,
                      level: float = 0.05) -> CorrectedEstimate:
    """Split-panel jackknife correction of the named estimator.

    For PB the standard error comes from :func:`jackknife_variance`; the other
    estimators keep their full-sample standard error. Without an explicit
    ``critical_value`` the normal quantile at ``level`` is used.
    """
    check_estimator(estimator)
    kappa = jackknife_kappa(epsilon)
    beta_tilde, se, beta_hat = jackknife_estimate(panel, estimator, kappa, options)
    cv = _as_cv(critical_value, level, beta_tilde.shape[0])
    return CorrectedEstimate(beta_tilde, "jackknife", kappa, cv,
                             confidence_interval(beta_tilde, se, cv), se, beta_hat)


# ---------------------------------------------------------------- bootstrap

@dataclass(frozen=True)
class SieveFit:
    """Step-one fit of the error-correction model given the long-run vector.

    Residual rows are packed per unit (``T_i - 1`` rows each); ``sidx`` maps
    each residual row to its calendar period so that a single sign per period
    multiplies every unit.
    """

    beta: np.ndarray
    c: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    uy: np.ndarray
    ux: np.ndarray
    y0: np.ndarray
    x0: np.ndarray
    sidx: np.ndarray
    n_periods: int


def sieve_fit(panel: PanelDataset, beta_hat) -> SieveFit:
    """Least-squares error-correction fit with ``beta`` held at ``beta_hat``.

    Each unit regresses ``dy_t`` on ``(1, xi_{t-1}, dx_t)`` with
    ``xi = y - beta'x``. The ``y`` residual handed to the resampler is
    ``dy - c + alpha xi_{-1}``, that is the short-run term ``delta'dx`` plus
    the innovation, so data without innovations are reproduced exactly.
    """
    beta = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    n, k = panel.n, panel.k
    c = np.empty(n)
    alpha = np.empty(n)
    delta = np.empty((n, k))
    uy, ux, sidx = [], [], []
    start = int(panel.t0.min()) + 1
    for i, u in enumerate(panel.units):
        xi = u.y - u.X @ beta
        dy = np.diff(u.y)
        dX = np.diff(u.X, axis=0)
        D = np.column_stack([np.ones(u.T - 1), xi[:-1], dX])
        coef, *_ = np.linalg.lstsq(D, dy, rcond=None)
        c[i], alpha[i], delta[i] = coef[0], -coef[1], coef[2:]
        uy.append(dy - c[i] + alpha[i] * xi[:-1])
        ux.append(dX)
        sidx.append(u.t0 + np.arange(1, u.T) - start)
    sidx = np.concatenate(sidx)
    y0 = panel.y[panel.offsets[:-1]]
    x0 = panel.X[panel.offsets[:-1]]
    return SieveFit(beta, c, alpha, delta, np.concatenate(uy), np.concatenate(ux, axis=0),
                    y0, x0, sidx.astype(np.int64), int(sidx.max()) + 1)


def rademacher(seed: int, r: int, n_periods: int) -> np.ndarray:
    """Sign vector of replicate ``r``; depends only on ``(seed, r)``."""
    rng = replication_rng(seed, r)
    return 2.0 * rng.integers(0, 2, size=n_periods) - 1.0


def regenerate_panel(panel: PanelDataset, sf: SieveFit, signs, backend=None) -> PanelDataset:
    y, X = kernels.regenerate(sf.y0, sf.x0, panel.offsets, sf.c, sf.alpha, sf.beta,
                              sf.uy, sf.ux, signs, sf.sidx, backend=backend)
    return panel._replace_data(y, X)


@dataclass(frozen=True)
class BootstrapDraws:
    """Replicate estimates of a sieve wild bootstrap.

    ``beta_r`` and ``se_r`` are (R, k) over the replicates that succeeded;
    ``signs`` is the (R, periods) log of the Rademacher multipliers used.
    When jackknife replicates were requested, ``jk_beta_r`` and ``jk_se_r``
    hold the jackknife estimate and its standard error for each replicate.
    """

    beta_r: np.ndarray
    se_r: np.ndarray
    b_hat: np.ndarray
    R: int
    seed: int
    estimator_id: str
    beta_hat: np.ndarray
    n_failed: int = 0
    signs: np.ndarray | None = field(default=None, repr=False)
    jk_beta_r: np.ndarray | None = None
    jk_se_r: np.ndarray | None = None
    kappa: float | None = None


def sieve_wild_bootstrap(panel: PanelDataset, beta_hat, estimator: str = "pb", R: int = 199,
                         seed: int = 0, options: EstimatorOptions | None = None,
                         jackknife: bool = False, epsilon: float = 2.0,
                         max_fail: float = 0.05, backend=None) -> BootstrapDraws:
    """Sieve wild bootstrap draws of the named estimator.

    Parameters
    ----------
    beta_hat : array_like
        Long-run vector used both in the step-one fit and as the truth of
        the simulated data.
    R : int
        Number of replicates. Replicate ``r`` uses signs drawn from a stream
        determined by ``(seed, r)`` alone.
    jackknife : bool
        Also compute the jackknife estimate (weight from ``epsilon``) on every
        replicate, for jackknife critical values.
    max_fail : float
        Largest tolerated share of replicates whose estimation fails; failed
        replicates are dropped.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    check_estimator(estimator)
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    sf = sieve_fit(panel, beta_hat)
    kappa = jackknife_kappa(epsilon) if jackknife else None
    k = panel.k
    beta_r = np.full((R, k), np.nan)
    se_r = np.full((R, k), np.nan)
    jk_b = np.full((R, k), np.nan) if jackknife else None
    jk_s = np.full((R, k), np.nan) if jackknife else None
    signs = np.empty((R, sf.n_periods), dtype=np.int8)
    ok = np.zeros(R, dtype=bool)
    for r in range(R):
        a = rademacher(seed, r, sf.n_periods)
        signs[r] = a
        rep = regenerate_panel(panel, sf, a, backend)
        try:
            b, s = fit(rep, estimator, options)
            if jackknife:
                jb, js, _ = jackknife_estimate(rep, estimator, kappa, options)
        except (PanelError, np.linalg.LinAlgError):
            continue
        vals = (b, s, jb, js) if jackknife else (b, s)
        if not all(np.all(np.isfinite(v)) for v in vals):
            continue
        beta_r[r], se_r[r] = b, s
        if jackknife:
            jk_b[r], jk_s[r] = jb, js
        ok[r] = True
    n_failed = int(R - ok.sum())
    if n_failed > max_fail * R:
        raise PanelError(f"{n_failed} of {R} bootstrap replicates failed")
    keep = lambda v: None if v is None else v[ok]  # noqa: E731
    b_hat = beta_r[ok].mean(axis=0) - beta_hat
    return BootstrapDraws(beta_r[ok], se_r[ok], b_hat, int(ok.sum()), int(seed), estimator,
                          beta_hat, n_failed, signs[ok], keep(jk_b), keep(jk_s), kappa)


def _center(draws: BootstrapDraws, center):
    if isinstance(center, str):
        if center == "bhat":
            return draws.beta_hat
        if center == "zero":
            return np.zeros_like(draws.beta_hat)
        raise ValueError("center must be 'bhat', 'zero' or a vector")
    return np.broadcast_to(np.asarray(center, dtype=float), draws.beta_hat.shape)


def bootstrap_t(draws: BootstrapDraws, center="bhat", jackknife: bool = False) -> np.ndarray:
    """Replicate t-ratios, shape (R, k).

    Bias-corrected replicates ``beta_r - b_hat`` are used by default; with
    ``jackknife=True`` the replicate jackknife estimates and their standard
    errors are used instead.
    """
    c = _center(draws, center)
    if jackknife:
        if draws.jk_beta_r is None:
            raise ValueError("draws carry no jackknife replicates")
        return (draws.jk_beta_r - c) / draws.jk_se_r
    return (draws.beta_r - draws.b_hat - c) / draws.se_r


def order_statistic_quantile(values, level: float) -> np.ndarray:
    """Column-wise order statistic at index ``ceil((1-level) R)`` (1-based)."""
    v = np.sort(np.asarray(values, dtype=float), axis=0)
    R = v.shape[0]
    idx = min(max(math.ceil((1.0 - level) * R - 1e-9), 1), R)
    return v[idx - 1]


def bootstrap_critical_value(draws: BootstrapDraws, level: float = 0.05, center="bhat",
                             jackknife: bool = False) -> np.ndarray:
    """Per-coefficient ``(1-level)`` quantile of ``|t_r|``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if draws.R < 1.0 / level:
        warnings.warn(f"R={draws.R} is below 1/level; quantile is unreliable", stacklevel=2)
    return order_statistic_quantile(np.abs(bootstrap_t(draws, center, jackknife)), level)


def confidence_interval(beta_tilde, se, critical_value) -> np.ndarray:
    """(k, 2) array of ``beta_tilde -/+ critical_value * se``."""
    beta_tilde = np.atleast_1d(np.asarray(beta_tilde, dtype=float))
    half = np.asarray(critical_value, dtype=float) * np.asarray(se, dtype=float)
    return np.column_stack([beta_tilde - half, beta_tilde + half])


def _as_cv(cv, level, k):
    if cv is None:
        cv = normal_critical_value(level)
    return np.broadcast_to(np.asarray(cv, dtype=float), (k,)).copy()


def bootstrap_correct(panel: PanelDataset, estimator: str = "pb", R: int = 199, seed: int = 0,
                      level: float = 0.05, center="bhat",
                      options: EstimatorOptions | None = None,
                      draws: BootstrapDraws | None = None) -> CorrectedEstimate:
    """Bootstrap bias-corrected estimate with a bootstrap critical value."""
    beta_hat, se = fit(panel, estimator, options)
    if draws is None:
        draws = sieve_wild_bootstrap(panel, beta_hat, estimator, R, seed, options)
    beta_tilde = beta_hat - draws.b_hat
    cv = bootstrap_critical_value(draws, level, center)
    return CorrectedEstimate(beta_tilde, "bootstrap", None, cv,
                             confidence_interval(beta_tilde, se, cv), se, beta_hat, draws.b_hat)


def uncorrected(panel: PanelDataset, estimator: str = "pb", level: float = 0.05,
                options: EstimatorOptions | None = None) -> CorrectedEstimate:
    """Plain estimate with a normal critical value, in the corrected-result layout."""
    beta_hat, se = fit(panel, estimator, options)
    cv = _as_cv(None, level, beta_hat.shape[0])
    return CorrectedEstimate(beta_hat, "none", None, cv, confidence_interval(beta_hat, se, cv),
                             se, beta_hat)
