import warnings
from dataclasses import replace

import numpy as np
import pytest

from oracles import pmg_step_dense
from conftest import noisy_panel
from pbpanel.dgp import simulate_ardl_panel
from pbpanel.panel import PanelDataset, PanelError, UnitSeries, demean
from pbpanel.pmg import pmg_beta_step, pmg_estimate, pmg_variance, pooled_engle_granger


def _units(panel):
    return [(u.y, u.X) for u in panel.units]


def test_exact_model_homogeneous_alpha(rng):
    n = 6
    panel = simulate_ardl_panel([1.3, -0.4], np.full(n, 0.35), rng.normal(size=(n, 2)),
                                rng.normal(size=n), 25, rng)
    res = pmg_estimate(panel, tol=1e-12)
    assert res.converged
    np.testing.assert_allclose(res.beta_hat, [1.3, -0.4], atol=1e-8)
    np.testing.assert_allclose(res.phi_hat, -0.35, atol=1e-8)
    # the concentrated iteration contracts linearly (about 0.4 per step here)
    assert res.iterations < 40


def test_beta_step_matches_dense_oracle():
    y = np.array([[0.3, 1.1, 0.7, 1.9, 2.4, 2.0],
                  [-0.5, 0.2, 0.9, 0.4, 1.3, 1.8]])
    x = np.array([[0.1, 0.9, 1.0, 1.7, 2.5, 2.2],
                  [-0.2, 0.4, 0.6, 0.8, 1.1, 1.9]])
    panel = PanelDataset.from_arrays(y, x[:, :, None])
    phi, s2 = np.array([-0.4, -0.7]), np.array([0.8, 1.3])
    got = pmg_beta_step(panel, phi, s2)
    want = pmg_step_dense(_units(panel), phi, s2)
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_plug_back_fixed_point(rng):
    panel = noisy_panel(rng, n=5, T=30, beta=(1.0, 0.5))
    res = pmg_estimate(panel, tol=1e-13, max_iter=5000)
    assert res.converged
    again = pmg_step_dense(_units(panel), res.phi_hat, res.sigma2_hat)
    np.testing.assert_allclose(res.beta_hat, again, atol=1e-10)
    assert np.all(res.sigma2_hat > 0)


def test_pooled_engle_granger_dense_and_trivial(rng):
    panel = noisy_panel(rng, n=4, T=20, beta=(1.0, 2.0))
    Z = np.vstack([demean(u.X[1:]) for u in panel.units])
    Y = np.concatenate([demean(u.y[1:]) for u in panel.units])
    want = np.linalg.lstsq(Z, Y, rcond=None)[0]
    np.testing.assert_allclose(pooled_engle_granger(panel), want, rtol=1e-12)
    x = np.cumsum(rng.normal(size=(3, 15)), axis=1)
    exact = PanelDataset.from_arrays(x, x[:, :, None])
    np.testing.assert_allclose(pooled_engle_granger(exact), [1.0], rtol=1e-12)


def test_iteration_deterministic(rng):
    panel = noisy_panel(rng, n=5, T=20)
    a, b = pmg_estimate(panel), pmg_estimate(panel)
    np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
    assert a.iterations == b.iterations


def test_location_invariance(rng):
    panel = noisy_panel(rng, n=5, T=20)
    shifted = PanelDataset(panel.y + 5.0, panel.X - 1.0, panel.offsets, panel.unit_ids,
                           panel.t0)
    np.testing.assert_allclose(pmg_estimate(shifted, tol=1e-12).beta_hat,
                               pmg_estimate(panel, tol=1e-12).beta_hat, rtol=1e-8)


def test_nonconvergence_is_flagged(rng):
    panel = noisy_panel(rng, n=5, T=20)
    res = pmg_estimate(panel, tol=1e-300, max_iter=2)
    assert not res.converged and res.iterations == 2
    with pytest.warns(UserWarning, match="converge"):
        pmg_variance(panel, res)


def test_homogeneous_variance_collapse(rng):
    panel = noisy_panel(rng, n=4, T=20)
    res = pmg_estimate(panel)
    phi, s2 = -0.3, 0.9
    res = replace(res, phi_hat=np.full(4, phi), sigma2_hat=np.full(4, s2))
    omega, se = pmg_variance(panel, res)
    r = []
    for u in panel.units:
        D = np.column_stack([np.diff(u.X, axis=0), np.ones(u.T - 1)])
        X = u.X[1:]
        H = np.eye(u.T - 1) - D @ np.linalg.pinv(D)
        r.append((X.T @ H @ X)[0, 0] / (u.T - 1) ** 2)
    assert omega[0, 0] == pytest.approx(s2 / (abs(phi) * np.mean(r)), rel=1e-10)
    assert se[0] == pytest.approx(np.sqrt(omega[0, 0]) / (19 * 2), rel=1e-12)


def test_wrong_signed_loadings_warn(rng):
    panel = noisy_panel(rng, n=3, T=20)
    res = replace(pmg_estimate(panel), phi_hat=np.full(3, 0.4))
    with pytest.warns(UserWarning, match="positive semidefinite"):
        omega, se = pmg_variance(panel, res)
    assert np.all(np.isnan(se))


def test_constant_regressor_difference_rejected():
    y = np.arange(10.0)[None, :]
    x = np.ones((1, 10, 1))
    with pytest.raises(PanelError, match="rank"):
        pmg_estimate(PanelDataset.from_arrays(y, x))
