import math

import numpy as np
import pytest

from czlab.geometry import ModelManifold, green
from czlab.quadrature import quad
from czlab.radialcalc import (
    BumpSum,
    FunctionProfile,
    GreenProfile,
    NormTriple,
    build_phi,
    check_pointwise_trace_bound,
    compose,
    grad_abs,
    hess_hs_sq,
    laplacian,
    lemma_norms,
    lp_norm,
    radial_norms,
    window_phi,
)
from czlab.warpfn import make_analytic_warp

from conftest import tooth_grid

R2 = FunctionProfile.power(2)
R1 = FunctionProfile.power(1)


# ---------------------------------------------------------------- pointwise

def test_pointwise_examples(E2, E3, H2):
    assert grad_abs(E2, R2, 3.0) == 6.0
    assert grad_abs(E2, BumpSum([2.5], [0.5], [1.0]), 5.0) == 0.0
    np.testing.assert_allclose(laplacian(E2, R2, np.linspace(0.1, 9, 30)), 4.0, rtol=1e-14)
    assert laplacian(H2, R1, 1.0) == pytest.approx(1 / math.tanh(1.0), rel=1e-14)
    np.testing.assert_allclose(hess_hs_sq(E2, R2, np.linspace(0.1, 9, 30)), 8.0, rtol=1e-14)
    assert hess_hs_sq(E3, R1, 2.0) == pytest.approx(0.5, rel=1e-14)


def test_grad_of_composition_matches_fd(E2):
    phi, a, b = build_phi(1)
    u = compose(E2, phi, a, b)
    r = np.linspace(math.e * 1.01, math.e**2 * 0.99, 40)
    exact = np.abs(phi(np.log(r), 1)) / r
    np.testing.assert_allclose(grad_abs(E2, u, r), exact, rtol=1e-13, atol=1e-15)
    h = 1e-5
    fd = (u(r + h) - u(r - h)) / (2 * h)
    np.testing.assert_allclose(np.abs(fd), exact, rtol=1e-6, atol=1e-9)


def test_exception_points_rejected(E2):
    u = GreenProfile(E2, 1.0, 2.0)
    with pytest.raises(ValueError):
        laplacian(E2, u, 2.0)
    with pytest.raises(ValueError):
        hess_hs_sq(E2, u, np.array([1.5, 1.0]))
    with pytest.raises(ValueError):
        laplacian(E2, R2, 0.0)


def test_green_profile_is_harmonic(S2, saw, H3):
    r = np.concatenate([np.linspace(2.1, 139, 400)] + [tooth_grid(saw, k) for k in range(1, 5)])
    lap = laplacian(S2, GreenProfile(S2, 2.0, 140.0), r)
    g1 = green(S2).deriv(r)[0]
    assert np.max(np.abs(lap) / np.abs(g1).max()) < 1e-9
    r = np.linspace(0.2, 5, 100)
    assert np.max(np.abs(laplacian(H3, GreenProfile(H3, 0.1, 6.0), r))) < 1e-10


def test_trace_bound(E2, S2, saw):
    v = check_pointwise_trace_bound(E2, R2, np.linspace(0.1, 5, 50))
    assert abs(v) <= 1e-12
    assert check_pointwise_trace_bound(S2, GreenProfile(S2, 2.0, 140.0),
                                       np.linspace(2.5, 130, 300)) <= 0
    rng = np.random.default_rng(3)
    w = saw.meta["windows"][1]
    u = BumpSum([w["start"] + 0.5], [1.5], [0.8])
    grid = np.sort(np.concatenate([rng.uniform(w["start"] - 1, w["start"] + 2, 500),
                                   tooth_grid(saw, 2, 301)]))
    grid = grid[np.abs(grid - (w["start"] + 0.5)) > 1e-9]
    assert check_pointwise_trace_bound(S2, u, grid) <= 1e-12


# --------------------------------------------------------------------- phi

def test_build_phi():
    phi, a, b = build_phi(1)
    assert (a, b) == (1.0, 2.0)
    assert phi(1.375) == pytest.approx(0.75, abs=1e-15)
    x = np.linspace(1.25, 1.5, 11)
    np.testing.assert_allclose(phi(x), 2 * (x - 1), atol=1e-15)
    np.testing.assert_allclose(phi(x, 1), 2.0, atol=1e-13)
    assert np.all(phi(np.array([0.5, 1.0, 2.0, 2.5])) == 0)
    assert phi.support == (1.0, 2.0)


def test_phi_sup_norms_independent_of_k():
    x = np.linspace(0, 1, 4001)
    ref = [np.max(np.abs(build_phi(1)[0](x + 1, nu))) for nu in range(3)]
    for k in (2, 7):
        got = [np.max(np.abs(build_phi(k)[0](x + k, nu))) for nu in range(3)]
        np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_phi_is_c2():
    phi = build_phi(0)[0]
    for x0 in (0.0, 0.25, 0.5, 1.0):
        for nu in range(3):
            # a genuine jump would be O(1); phi''' is O(100) so allow the slope
            left, right = phi(x0 - 1e-12, nu), phi(x0 + 1e-12, nu)
            assert abs(left - right) < 1e-7


def test_window_phi_rescale():
    f = window_phi(0.3, 0.7)
    assert f.support == (0.3, 0.7)
    assert f(0.3 + 0.4 * 0.375) == pytest.approx(0.75, abs=1e-14)
    with pytest.raises(ValueError):
        window_phi(1.0, 1.0)


def test_compose_validation(H2, E3):
    phi, a, b = build_phi(1)
    with pytest.raises(ValueError):
        compose(H2, phi, a, b)  # sup G < 1 on the hyperbolic plane
    with pytest.raises(ValueError):
        compose(E3, phi, 1.2, 2.0)  # support not inside window


# ------------------------------------------------------------------- norms

def test_lp_zero_and_homogeneity(E2, S2):
    zero = BumpSum([1.5], [0.5], [0.0])
    assert lp_norm(E2, "u", zero).value == 0.0
    u = BumpSum([5.0, 6.5], [1.0, 0.7], [0.9, -0.4])
    for field in ("u", "grad", "hess", "laplacian"):
        base = lp_norm(S2, field, u, p=2.0).value
        for c in (-2.0, 0.5):
            scaled = BumpSum([5.0, 6.5], [1.0, 0.7], [0.9 * c, -0.4 * c])
            assert lp_norm(S2, field, scaled, p=2.0).value == pytest.approx(abs(c) * base, rel=1e-12)


def test_lp_bump_against_oracle(E2):
    u = BumpSum([1.5], [0.5], [1.0])
    for p in (1.5, 2.0, 3.0):
        ref = quad(lambda r: np.abs((1 - ((r - 1.5) / 0.5) ** 2) ** 3) ** p * r, 1.0, 2.0,
                   rtol=1e-14).value
        assert lp_norm(E2, "u", u, p=p).value == pytest.approx((2 * math.pi * ref) ** (1 / p),
                                                              rel=1e-10)
    with pytest.raises(ValueError):
        lp_norm(E2, "u", u, p=1.0)
    with pytest.raises(ValueError):
        lp_norm(E2, "volume", u)


def test_lemma_zero_phi(E2):
    phi = BumpSum([1.5], [0.5], [0.0])
    n = lemma_norms(E2, compose(E2, phi, 1.0, 2.0))
    assert (n.hess_sq, n.lap_sq, n.u_sq) == (0.0, 0.0, 0.0)


def test_lemma_euclidean_closed_form(E2):
    phi, a, b = build_phi(1)
    n = lemma_norms(E2, compose(E2, phi, a, b))
    ref = lambda f: 2 * math.pi * sum(quad(f, lo, hi, rtol=1e-14).value
                                      for lo, hi in ((1, 1.25), (1.25, 1.5), (1.5, 2)))
    assert n.u_sq == pytest.approx(ref(lambda s: phi(s) ** 2 * np.exp(2 * s)), rel=1e-10)
    assert n.lap_sq == pytest.approx(ref(lambda s: phi(s, 2) ** 2 * np.exp(-2 * s)), rel=1e-10)
    assert n.hess_sq == pytest.approx(ref(lambda s: phi(s, 1) ** 2 * np.exp(-2 * s)), rel=1e-10)
    assert isinstance(n, NormTriple)


WINDOWS = {
    "e2": [(-1, 0), (0.5, 1.5), (2, 3)],
    "h2": [(-1, 0), (0, 0.5), (0.3, 0.7)],
    "e3": [(-2, -1), (0, 0.8)],
    "h3": [(-1, 0), (0, 0.2)],
    "s2": [(1, 2), (2, 3), (3, 4), (4, 5), (0.2, 4.6)],
    "s3": [(-0.5, 0.2), (0.2, 0.3)],
}
MATRIX = [(name, w) for name, ws in WINDOWS.items() for w in ws]


def _manifold(name, saw):
    m = int(name[1])
    if name[0] == "s":
        return ModelManifold(m, saw)
    return ModelManifold(m, make_analytic_warp("euclidean" if name[0] == "e" else "hyperbolic"))


@pytest.mark.parametrize("name, window", MATRIX, ids=[f"{n}-{w}" for n, w in MATRIX])
def test_s_and_r_space_agree(saw, name, window):
    M = _manifold(name, saw)
    a, b = window
    phi = build_phi(a)[0] if b - a == 1 and a >= 1 and float(a).is_integer() else window_phi(a, b)
    f = compose(M, phi, a, b)
    L = lemma_norms(M, f)
    R = radial_norms(M, f, hess="lower")
    for x, y in ((L.hess_sq, R.hess_sq), (L.lap_sq, R.lap_sq), (L.u_sq, R.u_sq)):
        assert x == pytest.approx(y, rel=1e-7)
    F = radial_norms(M, f, hess="full")
    assert L.hess_sq <= F.hess_sq * (1 + 1e-10)
    lap = lp_norm(M, "laplacian", f).value
    assert lap == pytest.approx(math.sqrt(L.lap_sq), rel=1e-7)


@pytest.mark.parametrize("k", [1, 3])
def test_tolerance_halving_consistent(S2, k):
    phi, a, b = build_phi(k)
    f = compose(S2, phi, a, b)
    n1, n2 = lemma_norms(S2, f, rtol=1e-9), lemma_norms(S2, f, rtol=5e-10)
    for v1, v2, e1 in ((n1.hess_sq, n2.hess_sq, n1.hess_err),
                       (n1.lap_sq, n2.lap_sq, n1.lap_err),
                       (n1.u_sq, n2.u_sq, n1.u_err)):
        assert abs(v1 - v2) <= max(e1, 1e-15 * abs(v1))
        assert e1 <= 1e-9 * v1 + 1e-300


def test_radial_norms_rejects_mode(E2):
    with pytest.raises(ValueError):
        radial_norms(E2, R2, hess="bogus")
