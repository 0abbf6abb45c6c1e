import warnings
from dataclasses import replace

import numpy as np
import pytest

from oracles import jackknife_omega_v_dense
from conftest import noisy_panel
from pbpanel import inference as inf
from pbpanel.panel import PanelDataset, PanelError
from pbpanel.pb import pb_estimate, pb_variance


@pytest.mark.parametrize("eps, kappa", [(1, 1.0), (2, 1 / 3), (3, 1 / 7)])
def test_kappa_values(eps, kappa):
    assert inf.jackknife_kappa(eps) == pytest.approx(kappa, rel=1e-15)


@pytest.mark.parametrize("eps", [0, -1])
def test_kappa_rejects_nonpositive(eps):
    with pytest.raises(ValueError):
        inf.jackknife_kappa(eps)


def test_jackknife_cancels_quadratic_bias():
    beta, c, T = np.array([1.0, -2.0]), np.array([0.7, 3.1]), 20.0
    full = beta + c / T**2
    half = beta + c / (T / 2) ** 2
    out = inf.jackknife_combine(full, half, half, inf.jackknife_kappa(2))
    np.testing.assert_allclose(out, beta, rtol=1e-14)
    np.testing.assert_array_equal(inf.jackknife_combine(full, full, full, 1 / 3), full)


def test_split_halves_cover_sample(rng):
    panel = noisy_panel(rng, n=3, T=15, lengths=[15, 12, 11])
    a, b = inf.split_halves(panel)
    T_eff = panel.lengths - 1
    np.testing.assert_array_equal(a.lengths - 1, T_eff // 2)
    np.testing.assert_array_equal((a.lengths - 1) + (b.lengths - 1), T_eff)
    for u, ua, ub in zip(panel.units, a.units, b.units):
        np.testing.assert_array_equal(ua.y, u.y[: ua.T])
        np.testing.assert_array_equal(ub.y, u.y[u.T - ub.T:])


def test_jackknife_variance_dense_oracle(rng):
    panel = noisy_panel(rng, n=2, T=11)
    kappa = 1 / 3
    bt = inf.jackknife_correct(panel, "pb").beta_tilde
    omega_v, cov = inf.jackknife_variance(panel, bt, kappa)
    want = jackknife_omega_v_dense([(u.y, u.X) for u in panel.units], bt, kappa)
    np.testing.assert_allclose(omega_v, want, rtol=1e-10)
    assert omega_v[0, 0] >= 0


def test_jackknife_variance_kappa_zero_reduces(rng):
    panel = noisy_panel(rng, n=4, T=20, beta=(1.0, 0.5))
    bt = np.array([0.9, 0.6])
    omega_v, cov = inf.jackknife_variance(panel, bt, 0.0)
    ox, ov, c = pb_variance(panel, bt)
    np.testing.assert_allclose(omega_v, ov, rtol=1e-12)
    np.testing.assert_allclose(cov, c, rtol=1e-10)


def test_jackknife_correct_pb_and_others(rng):
    panel = noisy_panel(rng, n=5, T=24)
    res = inf.jackknife_correct(panel, "pb")
    assert res.method == "jackknife" and res.kappa == pytest.approx(1 / 3)
    a, b = inf.split_halves(panel)
    ba, bb = (pb_estimate(h, per_unit=False).beta_hat for h in (a, b))
    np.testing.assert_allclose(res.beta_tilde,
                               inf.jackknife_combine(res.beta_hat, ba, bb, 1 / 3), rtol=1e-12)
    assert np.all(res.ci[:, 0] < res.ci[:, 1])
    pmg = inf.jackknife_correct(panel, "pmg")
    np.testing.assert_allclose(pmg.se, inf.fit(panel, "pmg")[1])


def test_half_sample_failure_names_half(rng):
    panel = noisy_panel(rng, n=3, T=9, beta=(1.0, 0.5))
    inf.fit(panel, "pb")
    with pytest.raises(PanelError, match="half-sample a"):
        inf.jackknife_correct(panel, "pb")


def test_bootstrap_zero_residuals(rng):
    panel = noisy_panel(rng, n=4, T=15, sigma_v=0.0)
    beta_hat, _ = inf.fit(panel, "pb")
    draws = inf.sieve_wild_bootstrap(panel, beta_hat, "pb", R=20, seed=3)
    np.testing.assert_allclose(draws.beta_r, np.tile(beta_hat, (20, 1)), atol=1e-9)
    np.testing.assert_allclose(draws.b_hat, 0.0, atol=1e-9)


def test_bootstrap_deterministic(rng):
    panel = noisy_panel(rng, n=4, T=15)
    beta_hat, _ = inf.fit(panel, "pb")
    a = inf.sieve_wild_bootstrap(panel, beta_hat, R=15, seed=11, jackknife=True)
    b = inf.sieve_wild_bootstrap(panel, beta_hat, R=15, seed=11, jackknife=True)
    for f in ("beta_r", "se_r", "b_hat", "signs", "jk_beta_r", "jk_se_r"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = inf.sieve_wild_bootstrap(panel, beta_hat, R=15, seed=12)
    assert not np.array_equal(a.beta_r, c.beta_r)
    np.testing.assert_allclose(a.b_hat, a.beta_r.mean(axis=0) - beta_hat)


def test_common_multiplier_across_units(rng):
    panel = noisy_panel(rng, n=3, T=12, lengths=[12, 9, 12])
    beta_hat, _ = inf.fit(panel, "pb")
    sf = inf.sieve_fit(panel, beta_hat)
    draws = inf.sieve_wild_bootstrap(panel, beta_hat, R=5, seed=2)
    for a in draws.signs:
        assert set(np.unique(a)) <= {-1, 1}
        rep = inf.regenerate_panel(panel, sf, a.astype(float))
        dX = np.concatenate([np.diff(u.X, axis=0) for u in rep.units])
        np.testing.assert_allclose(dX, a[sf.sidx, None] * sf.ux, atol=1e-12)


def test_rademacher_balanced():
    a = np.array([inf.rademacher(5, r, 8) for r in range(10000)])
    assert set(np.unique(a)) == {-1.0, 1.0}
    assert np.all(np.abs(a.mean(axis=0)) < 0.03)


def test_too_many_failures_raise(rng, monkeypatch):
    panel = noisy_panel(rng, n=3, T=15)
    beta_hat, _ = inf.fit(panel, "pb")
    real = inf.fit
    calls = {"n": 0}

    def flaky(p, est="pb", options=None):
        calls["n"] += 1
        if calls["n"] % 4 == 0:
            raise PanelError("synthetic failure")
        return real(p, est, options)

    monkeypatch.setattr(inf, "fit", flaky)
    with pytest.raises(PanelError, match="replicates failed"):
        inf.sieve_wild_bootstrap(panel, beta_hat, R=40, seed=0)


def test_few_failures_dropped(rng, monkeypatch):
    panel = noisy_panel(rng, n=3, T=15)
    beta_hat, _ = inf.fit(panel, "pb")
    real = inf.fit
    calls = {"n": 0}

    def flaky(p, est="pb", options=None):
        calls["n"] += 1
        if calls["n"] == 7:
            raise PanelError("synthetic failure")
        return real(p, est, options)

    monkeypatch.setattr(inf, "fit", flaky)
    draws = inf.sieve_wild_bootstrap(panel, beta_hat, R=40, seed=0)
    assert draws.R == 39 and draws.n_failed == 1 and draws.signs.shape[0] == 39


def _draws(t, se=1.0):
    t = np.asarray(t, float).reshape(-1, 1)
    R = t.shape[0]
    return inf.BootstrapDraws(beta_r=t * se, se_r=np.full((R, 1), se), b_hat=np.zeros(1), R=R,
                              seed=0, estimator_id="pb", beta_hat=np.zeros(1))


@pytest.mark.parametrize("level", [0.01, 0.05, 0.5])
def test_constant_t_gives_constant_cv(level):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert inf.bootstrap_critical_value(_draws(np.full(19, 2.0)), level)[0] == 2.0


@pytest.mark.parametrize("level, index", [(0.05, 19), (0.10, 18), (0.5, 10)])
def test_order_statistic_index(level, index):
    vals = np.arange(1.0, 20.0)[::-1]
    assert inf.order_statistic_quantile(vals, level) == index


def test_small_R_warns():
    with pytest.warns(UserWarning, match="unreliable"):
        inf.bootstrap_critical_value(_draws(np.ones(10)), 0.05)
    with pytest.raises(ValueError):
        inf.bootstrap_critical_value(_draws(np.ones(10)), 1.0)


def test_normal_quantile_by_simulation():
    t = np.random.default_rng(7).standard_normal(10000)
    assert inf.bootstrap_critical_value(_draws(t), 0.05)[0] == pytest.approx(1.96, abs=0.05)
    assert inf.normal_critical_value(0.05) == pytest.approx(1.959964, abs=1e-6)


def test_centering_options():
    d = replace(_draws([1.0, 2.0, 3.0]), beta_hat=np.array([1.0]))
    np.testing.assert_allclose(inf.bootstrap_t(d, "bhat")[:, 0], [0, 1, 2])
    np.testing.assert_allclose(inf.bootstrap_t(d, "zero")[:, 0], [1, 2, 3])
    np.testing.assert_allclose(inf.bootstrap_t(d, [3.0])[:, 0], [-2, -1, 0])


def test_confidence_interval_properties():
    se = 0.0675 / 1.96
    ci = inf.confidence_interval(0.912, se, 1.96)
    np.testing.assert_allclose(ci[0], [0.845, 0.980], atol=1e-3)
    np.testing.assert_allclose(ci.mean(axis=1), [0.912])
    np.testing.assert_array_equal(inf.confidence_interval([0.5, 1.0], [0.1, 0.2], 0.0),
                                  [[0.5, 0.5], [1.0, 1.0]])


def test_bootstrap_correct_uses_bias(rng):
    panel = noisy_panel(rng, n=4, T=15)
    res = inf.bootstrap_correct(panel, "pb", R=25, seed=1)
    np.testing.assert_allclose(res.beta_tilde, res.beta_hat - res.b_hat)
    assert res.method == "bootstrap" and np.all(res.critical_value > 0)
