import numpy as np
import pytest

from pbpanel.panel import (
    PanelDataset,
    PanelError,
    SingularInstrumentsError,
    UnitSeries,
    annihilator,
    build_instruments,
    demean,
    lagged_design,
    min_length,
    projection,
)

from oracles import annihilator_dense


def _unit(rng, T=8, k=1, uid="a", t0=0):
    return UnitSeries(uid, rng.normal(size=T).cumsum(), rng.normal(size=(T, k)).cumsum(axis=0), t0)


def test_min_length():
    assert min_length(1) == 5
    assert min_length(2) == 7
    assert min_length(1, order=2) == 8


def test_unit_series_validates_shapes(rng):
    with pytest.raises(PanelError):
        UnitSeries("a", np.zeros(5), np.zeros((4, 1)))
    with pytest.raises(PanelError):
        UnitSeries("a", np.array([0, 1, np.nan, 2, 3.0]), np.zeros((5, 1)))


def test_from_units_rejects_short_and_duplicates(rng):
    with pytest.raises(PanelError, match="minimum length"):
        PanelDataset.from_units([_unit(rng, T=4)])
    with pytest.raises(PanelError, match="duplicate"):
        PanelDataset.from_units([_unit(rng), _unit(rng)])
    with pytest.raises(PanelError):
        PanelDataset.from_units([_unit(rng, k=1), _unit(rng, k=2, uid="b")])


def test_packed_layout_round_trip(rng):
    units = [_unit(rng, T=6, uid="a"), _unit(rng, T=9, uid="b", t0=3)]
    p = PanelDataset.from_units(units)
    assert p.n == 2 and p.k == 1 and not p.balanced
    assert list(p.lengths) == [6, 9]
    for u, v in zip(units, p.units):
        np.testing.assert_array_equal(u.y, v.y)
        np.testing.assert_array_equal(u.X, v.X)
        assert u.t0 == v.t0
    assert not p.y.flags.writeable


def test_window_shifts_origin(rng):
    p = PanelDataset.from_units([_unit(rng, T=10, uid="a"), _unit(rng, T=12, uid="b")])
    w = p.window(np.array([2, 3]), np.array([8, 12]))
    assert list(w.lengths) == [6, 9]
    assert list(w.t0) == [2, 3]
    np.testing.assert_array_equal(w.unit(1).y, p.unit(1).y[3:12])


def test_demean_and_lagged_design(rng):
    with pytest.raises(ValueError):
        demean(np.array([]))
    u = _unit(rng, T=7)
    H, dZ, W = lagged_design(u.y, u.X, 1)
    np.testing.assert_array_equal(H[:, 0], u.y[:-1])
    np.testing.assert_array_equal(H[:, 1], u.X[1:, 0])
    np.testing.assert_array_equal(H[:, 2], u.X[:-1, 0])
    np.testing.assert_allclose(dZ[:, 0], np.diff(u.y))
    np.testing.assert_array_equal(W[:, -1], u.y[1:])


def test_build_instruments_matches_dense(rng):
    u = _unit(rng, T=9)
    ins = build_instruments(u)
    P = projection(ins.H_tilde)
    M = annihilator(P, ins.dZ_tilde)
    M_ref, _ = annihilator_dense(u.y, u.X)
    np.testing.assert_allclose(M, M_ref, atol=1e-12)
    assert ins.T_eff == 8


def test_singular_instruments_raise():
    y = np.arange(8.0)
    X = 2.0 * np.arange(8.0)[:, None]
    ins = build_instruments(UnitSeries("flat", y, X))
    with pytest.raises(SingularInstrumentsError) as info:
        projection(ins.H_tilde, "flat")
    assert list(info.value.units) == ["flat"]


def test_too_short_for_instruments_raises(rng):
    u = _unit(rng, T=5, k=2)
    with pytest.raises(SingularInstrumentsError, match="cannot identify"):
        build_instruments(u)
