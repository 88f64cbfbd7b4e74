"""Calculus of radial functions on a model manifold.

Pointwise operators (gradient, Laplacian, Hessian), L^p norms by piece-aware
adaptive quadrature, and the s-variable norm integrals of composed functions
u = phi(G(r)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import GreenFunction, ModelManifold, green
from .quadrature import integrate
from .warpfn import quintic_hermite

__all__ = [
    "RadialProfile",
    "PiecewiseProfile",
    "FunctionProfile",
    "BumpSum",
    "GreenProfile",
    "ComposedTestFunction",
    "NormTriple",
    "LpNorm",
    "build_phi",
    "window_phi",
    "compose",
    "grad_abs",
    "laplacian",
    "hess_hs_sq",
    "lp_norm",
    "lemma_norms",
    "radial_norms",
    "check_pointwise_trace_bound",
]

FIELDS = ("u", "grad", "hess", "laplacian")


# ----------------------------------------------------------------- profiles

class RadialProfile:
    """A compactly supported 1-D profile with derivatives up to order two.

    Subclasses implement ``eval(x) -> (v, v', v'')``.  As a radial function
    the profile is evaluated at r; ``at`` accepts sigma-local coordinates.
    """

    support = (0.0, math.inf)
    breaks = ()
    exceptions = ()  # points where the second derivative may jump

    def eval(self, x):
        raise NotImplementedError

    def __call__(self, x, nu=0):
        return self.eval(np.asarray(x, dtype=np.float64))[nu]

    # radial-function interface -------------------------------------------
    def at(self, M, p, tau):
        return self.eval(M.sigma.global_t(p, tau))

    def support_r(self, M):
        return self.support

    def breaks_r(self, M):
        return tuple(self.breaks)

    def exceptions_r(self, M):
        return tuple(self.exceptions)

    def scaled(self, c):
        return _Scaled(self, float(c))


class _Scaled(RadialProfile):
    def __init__(self, base, c):
        self.base = base
        self.c = c
        self.support = base.support
        self.breaks = base.breaks
        self.exceptions = base.exceptions

    def eval(self, x):
        return tuple(self.c * v for v in self.base.eval(x))

    def at(self, M, p, tau):
        return tuple(self.c * v for v in self.base.at(M, p, tau))

    def support_r(self, M):
        return self.base.support_r(M)

    def breaks_r(self, M):
        return self.base.breaks_r(M)

    def exceptions_r(self, M):
        return self.base.exceptions_r(M)


class PiecewiseProfile(RadialProfile):
    """Pieces on [breaks[i], breaks[i+1]] in local coordinates; zero outside."""

    def __init__(self, breaks, coeffs, exceptions=()):
        self.breaks = tuple(float(b) for b in breaks)
        c = np.zeros((len(coeffs) + 1, 6))
        for i, ci in enumerate(coeffs):
            c[i, : len(ci)] = ci
        self._coeffs = c  # last row is the zero tail
        self._lefts = np.asarray(self.breaks)
        self.support = (self.breaks[0], self.breaks[-1])
        self.exceptions = tuple(exceptions)

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        idx = _kernels.locate(self._lefts, x)
        tau = x - self._lefts[idx]
        outside = (x < self._lefts[0]) | (x >= self._lefts[-1])
        idx = np.where(outside, len(self._coeffs) - 1, idx)
        v, d1, d2 = _kernels.horner3(self._coeffs, idx, tau)
        return v, d1, d2

    def shifted(self, k):
        return PiecewiseProfile([b + k for b in self.breaks], self._coeffs[:-1],
                                [e + k for e in self.exceptions])

    def rescaled(self, alpha, beta):
        """x -> self(lo + (x - alpha) (hi - lo) / (beta - alpha))."""
        lo, hi = self.support
        L = (beta - alpha) / (hi - lo)
        br = [alpha + (b - lo) * L for b in self.breaks]
        c = self._coeffs[:-1] / L ** np.arange(6)
        return PiecewiseProfile(br, c, [alpha + (e - lo) * L for e in self.exceptions])

    @property
    def coeffs(self):
        return self._coeffs[:-1].copy()


class FunctionProfile(RadialProfile):
    """Closed-form profile from callables (value, first, second derivative)."""

    def __init__(self, f, df, d2f, support=(0.0, math.inf), name=""):
        self.f, self.df, self.d2f = f, df, d2f
        self.support = support
        self.name = name

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        z = np.zeros(x.shape)
        return (np.where(inside, self.f(x), z), np.where(inside, self.df(x), z),
                np.where(inside, self.d2f(x), z))

    @classmethod
    def power(cls, n):
        return cls(lambda x: x**n, lambda x: n * x ** (n - 1),
                   lambda x: n * (n - 1) * x ** (n - 2) if n != 1 else 0.0 * x,
                   name=f"r^{n}")


class BumpSum(RadialProfile):
    """Sum of C^2 bumps A (1 - ((x - c)/w)^2)^3 supported on |x - c| < w."""

    def __init__(self, centers, widths, amps):
        self.c = np.atleast_1d(np.asarray(centers, dtype=np.float64))
        self.w = np.atleast_1d(np.asarray(widths, dtype=np.float64))
        self.a = np.atleast_1d(np.asarray(amps, dtype=np.float64))
        if np.any(self.w <= 0):
            raise ValueError("bump widths must be positive")
        lo, hi = self.c - self.w, self.c + self.w
        self.support = (float(np.min(lo)), float(np.max(hi)))
        self.breaks = tuple(sorted(set(np.concatenate([lo, self.c, hi]).tolist())))

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        z = (x[..., None] - self.c) / self.w
        g = np.clip(1.0 - z * z, 0.0, None)
        v = np.sum(self.a * g**3, axis=-1)
        d1 = np.sum(self.a * (-6.0 * z * g**2) / self.w, axis=-1)
        d2 = np.sum(self.a * (-6.0 * g**2 + 24.0 * z * z * g) / self.w**2, axis=-1)
        return v, d1, d2


class GreenProfile(RadialProfile):
    """u = G on the window [a, b] and 0 outside (pointwise use only)."""

    def __init__(self, M, a, b):
        self.G = green(M)
        self.support = (float(a), float(b))
        self.breaks = (float(a), float(b))
        self.exceptions = (float(a), float(b))

    def at(self, M, p, tau):
        t = M.sigma.global_t(p, tau)
        inside = (t >= self.support[0]) & (t <= self.support[1])
        g = self.G.local_value(p, tau)
        g1, g2 = self.G.deriv(t)
        z = np.zeros(np.shape(t))
        return np.where(inside, g, z), np.where(inside, g1, z), np.where(inside, g2, z)

    def eval(self, x):
        p, tau = self.G.sigma.locate(x)
        return self.at(self.G.M, p, tau)


def build_phi(k=0):
    """C^2 piecewise-quintic phi(. - k): zero off [k, k+1], exactly 2(s - k) on
    [k+1/4, k+1/2].  Returns (phi_k, alpha_k, beta_k)."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    rise = quintic_hermite(0.0, 0.0, 0.0, 0.5, 2.0, 0.0, 0.25)
    line = np.array([0.5, 2.0])
    fall = quintic_hermite(1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.5)
    base = PiecewiseProfile([0.0, 0.25, 0.5, 1.0], [rise, line, fall])
    return base.shifted(k), float(k), float(k + 1)


def window_phi(alpha, beta):
    """The same profile stretched onto [alpha, beta]."""
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    return build_phi(0)[0].rescaled(alpha, beta)


# ------------------------------------------------------- composed functions

@dataclass(frozen=True)
class ComposedTestFunction(RadialProfile):
    """u(x) = phi(G(r(x))) with phi supported in [alpha, beta]."""

    phi: RadialProfile
    alpha: float
    beta: float
    green: GreenFunction

    def __post_init__(self):
        if not self.alpha < self.beta:
            raise ValueError("need alpha < beta")
        lo, hi = self.phi.support
        if lo < self.alpha - 1e-15 or hi > self.beta + 1e-15:
            raise ValueError("support of phi must lie in [alpha, beta]")
        s_max = self.green.s_max
        if s_max is not None and self.beta >= s_max:
            raise ValueError(f"window [{self.alpha}, {self.beta}] exceeds the range of G "
                             f"(sup G = {s_max})")

    @property
    def M(self):
        return self.green.M

    def at(self, M, p, tau):
        G = self.green
        s = G.local_value(p, tau)
        f, f1, f2 = self.phi.eval(s)
        sv, d1, _ = M.sigma.eval_local(p, tau)
        m = M.m
        g1 = sv ** (1.0 - m)
        g2 = (1.0 - m) * sv ** (-m) * d1
        return f, f1 * g1, f2 * g1 * g1 + f1 * g2

    def eval(self, x):
        p, tau = self.green.sigma.locate(x)
        return self.at(self.green.M, p, tau)

    def support_r(self, M):
        r = self.green.inverse(np.array([self.alpha, self.beta]))
        return float(r[0]), float(r[1])

    def breaks_r(self, M):
        b = np.array([x for x in self.phi.breaks if self.alpha <= x <= self.beta])
        return tuple(self.green.inverse(b).tolist()) if b.size else ()

    def exceptions_r(self, M):
        e = np.asarray(self.phi.exceptions, dtype=float)
        return tuple(self.green.inverse(e).tolist()) if e.size else ()


def compose(M, phi, alpha, beta):
    return ComposedTestFunction(phi, float(alpha), float(beta), green(M))


# --------------------------------------------------------- pointwise fields

def _fields(M, u, p, tau):
    U, U1, U2 = u.at(M, p, tau)
    s, d1, _ = M.sigma.eval_local(p, tau)
    q = d1 / s
    lap = U2 + (M.m - 1) * q * U1
    tang = (U1 * q) ** 2
    return dict(u=U, grad=np.abs(U1), laplacian=lap, hess_sq=U2 * U2 + (M.m - 1) * tang,
                tang=tang, dens=s ** (M.m - 1))


def _check_points(M, u, r):
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    ex = np.asarray(u.exceptions_r(M), dtype=float)
    if ex.size and np.any(np.isclose(r[:, None], ex[None, :], rtol=1e-14, atol=0)):
        raise ValueError("evaluation at a point where u is not C^2")
    return r


def _pointwise(M, u, r, key, check=True):
    scalar = np.ndim(r) == 0
    r = _check_points(M, u, r) if check else np.atleast_1d(np.asarray(r, float))
    p, tau = M.sigma.locate(r)
    out = _fields(M, u, p, tau)[key]
    return float(out[0]) if scalar else out


def grad_abs(M, u, r):
    return _pointwise(M, u, r, "grad", check=False)


def laplacian(M, u, r):
    return _pointwise(M, u, r, "laplacian")


def hess_hs_sq(M, u, r):
    return _pointwise(M, u, r, "hess_sq")


def check_pointwise_trace_bound(M, u, grid):
    """max over grid of |Lap u| - sqrt(m)|Hess u|."""
    r = _check_points(M, u, grid)
    p, tau = M.sigma.locate(r)
    f = _fields(M, u, p, tau)
    return float(np.max(np.abs(f["laplacian"]) - math.sqrt(M.m) * np.sqrt(f["hess_sq"])))


# -------------------------------------------------------------------- norms

@dataclass(frozen=True)
class LpNorm:
    value: float
    error: float


@dataclass(frozen=True)
class NormTriple:
    hess_sq: float
    lap_sq: float
    u_sq: float
    hess_err: float = 0.0
    lap_err: float = 0.0
    u_err: float = 0.0


def _r_panels(M, u):
    a, b = u.support_r(M)
    a = max(a, 0.0)
    return M.sigma.panels(a, b, extra=u.breaks_r(M))


def _r_integral(M, u, integrand, rtol):
    P, A, B = _r_panels(M, u)

    def f(p, x):
        return integrand(_fields(M, u, p, x))

    res = integrate(f, P, A, B, rtol=rtol)
    return M.omega * res.value, M.omega * res.error


def lp_norm(M, field, u, p=2.0, rtol=1e-10):
    """(omega_m int |field|^p sigma^(m-1) dr)^(1/p) with an error estimate."""
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    if not p > 1:
        raise ValueError("p must exceed 1")
    key = "hess_sq" if field == "hess" else field

    def integrand(fl):
        v = np.abs(fl[key])
        v = np.sqrt(v) if field == "hess" else v
        return v**p * fl["dens"]

    val, err = _r_integral(M, u, integrand, rtol)
    if val == 0:
        return LpNorm(0.0, err ** (1.0 / p))
    norm = val ** (1.0 / p)
    return LpNorm(norm, err * norm / (p * val))


def radial_norms(M, u, hess="full", rtol=1e-10) -> NormTriple:
    """Direct r-space squared L^2 norms.  ``hess="lower"`` keeps only the
    tangential block without its (m-1) multiplicity, which is what the
    s-variable lower bound integrates."""
    if hess not in ("full", "lower"):
        raise ValueError("hess must be 'full' or 'lower'")
    hk = "hess_sq" if hess == "full" else "tang"
    h, he = _r_integral(M, u, lambda f: f[hk] * f["dens"], rtol)
    lap, le = _r_integral(M, u, lambda f: f["laplacian"] ** 2 * f["dens"], rtol)
    us, ue = _r_integral(M, u, lambda f: f["u"] ** 2 * f["dens"], rtol)
    return NormTriple(h, lap, us, he, le, ue)


def _s_panels(G, alpha, beta, cuts, hint):
    """Panels (piece, ds0, ds1) in Green-local coordinates covering [alpha, beta]."""
    s_left = G.s_left
    n = len(s_left)
    s_right = np.append(s_left[1:], np.inf if G.s_max is None else G.s_max)
    first = int(_kernels.locate(s_left, np.array([alpha]))[0])
    last = int(_kernels.locate(s_left, np.array([beta]))[0])
    analytic = G.sigma.poly is None
    P, A, B = [], [], []
    for p in range(first, min(last, n - 1) + 1):
        lo, hi = max(alpha, s_left[p]), min(beta, s_right[p])
        if not hi > lo:
            continue
        ref = G.G_ref[p]
        if analytic:
            d_lo, d_hi = s_left[p], s_right[p]
        elif G.tau_ref[p] == 0.0:
            d_lo, d_hi = 0.0, G.delta[p]
        else:
            d_lo, d_hi = -G.delta[p], 0.0
        # use the stored piece increments at piece ends, never differences of
        # absolute s values (the teeth are ~1e-12 wide in s)
        a = d_lo if lo == s_left[p] else lo - ref
        b = d_hi if hi == s_right[p] else hi - ref
        inner = [c - ref for c in cuts if lo < c < hi]
        edges = np.concatenate([[a], inner, [b]])
        k = int(hint[p])
        if k > 1:
            edges = np.unique(np.concatenate([edges, a + (b - a) * np.arange(1, k) / k]))
        P.append(np.full(len(edges) - 1, p, dtype=np.int64))
        A.append(edges[:-1])
        B.append(edges[1:])
    if not P:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    return np.concatenate(P), np.concatenate(A), np.concatenate(B)


def lemma_norms(M, f: ComposedTestFunction, rtol=1e-10) -> NormTriple:
    """The three s-variable integrals of u = phi(G):

    hess_sq = omega int phi'^2 (sigma'/sigma)^2 ds   (lower bound for |Hess u|^2)
    lap_sq  = omega int phi''^2 sigma^(-2(m-1)) ds
    u_sq    = omega int phi^2 sigma^(2(m-1)) ds
    with sigma, sigma' evaluated at G^{-1}(s).
    """
    G = f.green
    if G.M != M:
        G = green(M)
    m = M.m
    cuts = [c for c in f.phi.breaks if f.alpha < c < f.beta]
    P, A, B = _s_panels(G, f.alpha, f.beta, cuts, M.sigma.hint)
    def pointwise(p, ds):
        tau = G.local_inverse(p, ds)
        sv, d1, _ = M.sigma.eval_local(p, tau)
        ph, ph1, ph2 = f.phi.eval(G.G_ref[p] + ds)
        return (ph1**2 * (d1 / sv) ** 2, ph2**2 * sv ** (-2.0 * (m - 1)),
                ph**2 * sv ** (2.0 * (m - 1)))

    res = []
    for j in range(3):
        r = integrate(lambda p, x, j=j: pointwise(p, x)[j], P, A, B, rtol=rtol)
        res.append(r)
    w = M.omega
    return NormTriple(w * res[0].value, w * res[1].value, w * res[2].value,
                      w * res[0].error, w * res[1].error, w * res[2].error)
