import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czlab.warpfn import (
    ConstructionError,
    PiecewisePoly,
    SawtoothSpec,
    build_sawtooth_warp,
    check_structural,
    make_analytic_warp,
    quintic_hermite,
)


# ------------------------------------------------------------- analytic warps

def test_euclidean_oracle():
    w = make_analytic_warp("euclidean", 1)
    assert [w(2.0, nu) for nu in range(3)] == [2.0, 1.0, 0.0]


def test_hyperbolic_normalisation():
    w = make_analytic_warp("hyperbolic", 2.0)
    assert w(0.0) == 0.0 and w(0.0, 1) == 1.0
    t = np.linspace(0.1, 5, 50)
    w1 = make_analytic_warp("hyperbolic", 1.0)
    np.testing.assert_allclose(w1(t, 2) / w1(t), 1.0, rtol=1e-14)


@pytest.mark.parametrize("scale", [0.0, -1.0])
def test_bad_scale(scale):
    with pytest.raises(ValueError):
        make_analytic_warp("hyperbolic", scale)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_analytic_warp("spherical", 1.0)


# --------------------------------------------------------------- hermite

@settings(max_examples=60, deadline=None)
@given(*[st.floats(-5, 5) for _ in range(6)], st.floats(1e-3, 3.0))
def test_quintic_hermite_matches_end_data(y0, d0, c0, y1, d1, c1, w):
    c = quintic_hermite(y0, d0, c0, y1, d1, c1, w)
    p = np.polynomial.Polynomial(c)
    scale = 1 + abs(y0) + abs(y1) + (abs(d0) + abs(d1)) * w + (abs(c0) + abs(c1)) * w * w
    assert p(0) == pytest.approx(y0, abs=1e-12 * scale)
    assert p(w) == pytest.approx(y1, abs=1e-12 * scale)
    assert p.deriv()(w) * w == pytest.approx(d1 * w, abs=1e-11 * scale)
    assert p.deriv(2)(w) * w * w == pytest.approx(c1 * w * w, abs=1e-10 * scale)


def test_split_at_preserves_values():
    poly = PiecewisePoly.from_pieces([(0, 0.0, np.array([0.0, 1.0, 0.5, -0.1]), 2.0)])
    t = np.linspace(0, 3, 31)
    before = poly(t)
    after = poly.split_at(1.3)(t)
    for a, b in zip(before, after):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    assert poly.split_at(1.3).n_pieces == poly.n_pieces + 1


def test_pieces_must_increase():
    with pytest.raises(ValueError):
        PiecewisePoly(np.array([0, 0]), np.array([0.0, 0.0]), np.array([1.0, np.inf]),
                      np.zeros((2, 6)))


# --------------------------------------------------------------- sawtooth

def test_default_sawtooth_structure(saw):
    wins = saw.meta["windows"]
    assert [w["h"] for w in wins] == [3, 10, 29, 79]
    for w in wins:
        assert w["h"] <= w["start"] < w["end"] <= w["h"] + 1
    assert saw.band_ok
    assert np.max(saw.poly.join_residuals()) <= 1e-10


def test_degenerate_spec_is_identity():
    w = build_sawtooth_warp(SawtoothSpec.default(teeth=0))
    assert np.all(w.poly.coeffs[:, 2:] == 0)
    np.testing.assert_array_equal(w.poly.coeffs[:, 1], 1.0)
    t = np.linspace(0, 200, 2001)
    np.testing.assert_array_equal(w(t), t)
    np.testing.assert_array_equal(w(t, 2), 0.0)


def test_ramp_slope_eps_01():
    w = build_sawtooth_warp(SawtoothSpec(1, (0.1,), 0.1, 1))
    ramps = [i for i in range(w.n_pieces - 1) if w.poly.hint[i] == 8]
    assert len(ramps) == 2
    rise = w.poly.coeffs[ramps[0], 1]
    assert 0.95 * 11 <= rise <= 1.05 * 11
    mid_t = w.lefts[ramps[0]] + w.widths[ramps[0]] / 2
    assert 0.95 * 11 <= w(mid_t, 1) <= 1.05 * 11


def test_curvature_grows_as_eps_shrinks():
    peaks = []
    for eps in (0.1, 0.01):
        w = build_sawtooth_warp(SawtoothSpec(1, (eps,), 0.1, 1))
        h = w.meta["windows"][0]["h"]
        p, tau = w.sample(h, h + 1, n_uniform=1000, per_piece=33)
        peaks.append(np.max(np.abs(w.eval_local(p, tau)[2])))
    assert peaks[1] / peaks[0] >= 50


def test_fd_derivatives_away_from_breaks():
    w = build_sawtooth_warp(SawtoothSpec(1, (0.1,), 0.1, 1))
    h = 1e-5
    bps = w.breakpoints
    t = np.linspace(0.5, 6.0, 3001)
    t = t[np.min(np.abs(t[:, None] - bps[None, :]), axis=1) > 3 * h]
    assert t.size > 2900
    v, d1, d2 = w.derivs(t)
    # five-point central stencil: exact for the quintic pieces up to rounding
    def fd(nu):
        return (w(t - 2 * h, nu) - 8 * w(t - h, nu) + 8 * w(t + h, nu) - w(t + 2 * h, nu)) / (12 * h)

    fd1, fd2 = fd(0), fd(1)
    assert np.all(np.abs(fd1 - d1) <= 1e-6 * np.maximum(np.abs(d1), 1))
    assert np.all(np.abs(fd2 - d2) <= 1e-6 * np.maximum(np.abs(d2), 1))


def test_band_on_dense_window_grid(saw):
    for w in saw.meta["windows"]:
        p, tau = saw.sample(w["h"], w["h"] + 1, n_uniform=1000, per_piece=33)
        t = saw.global_t(p, tau)
        s = saw.eval_local(p, tau)[0]
        assert np.all(s >= t * (1 - 1e-12)) and np.all(s <= (t + 1) * (1 + 1e-12))


def test_local_coordinates_resolve_thinnest_tooth(saw):
    w = saw.meta["windows"][-1]
    eps = w["eps"]
    i = int(np.nonzero(saw.poly.hint == 8)[0][-1])  # last ramp piece
    assert saw.widths[i] == pytest.approx(0.9 * eps, rel=1e-9)
    # the offset f = sigma - t peaks at the rounded top vertex: the symmetric
    # quartic corner of width rho*eps cuts 3*rho/16 off the unit apex
    p, tau = saw.sample(w["start"], w["end"], n_uniform=10, per_piece=33)
    f = saw.eval_local(p, tau)[0] - saw.global_t(p, tau)
    assert f.max() == pytest.approx(1.0 - 3 * 0.1 / 16, abs=1e-6)
    assert f.min() >= -1e-12


@pytest.mark.parametrize("kwargs", [
    dict(k_max=2, eps=(0.01, 0.1)),
    dict(k_max=1, eps=(0.3,)),
    dict(k_max=1, eps=(0.1,), rho=0.5),
    dict(k_max=2, eps=(0.1, 0.01), windows=(10, 10)),
    dict(k_max=2, eps=(0.1,)),
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SawtoothSpec(**kwargs)


def test_window_outside_green_range_fails():
    with pytest.raises(ConstructionError):
        build_sawtooth_warp(SawtoothSpec(1, (0.1,), windows=(40,)))


# ------------------------------------------------------------- structural

def test_structural_reports(saw):
    grid = np.linspace(0.01, 100, 5000)
    e = check_structural(make_analytic_warp("euclidean"), grid)
    assert e.structural_ok and e.band_ok and e.sigma0 == 0
    s2 = build_sawtooth_warp(SawtoothSpec.default(k_max=2))
    assert check_structural(s2, grid).band_ok
    shifted = make_analytic_warp("euclidean").shifted(0.5)
    rep = check_structural(shifted, grid)
    assert not rep.structural_ok and rep.sigma0 == 0.5
