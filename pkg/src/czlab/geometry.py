"""Curvature, volume, parabolicity and the radial Green function of a model
manifold R^m_sigma."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import _kernels
from .quadrature import fixed_panel, integrate, quad
from .warpfn import ConstructionError, WarpingFunction

__all__ = [
    "ModelManifold",
    "CurvatureSample",
    "GreenFunction",
    "ParabolicityReport",
    "curvature_at",
    "curvature_local",
    "ricci_extremes",
    "ball_volume",
    "is_parabolic",
    "green",
    "check_green_harmonic",
]


@dataclass(frozen=True)
class ModelManifold:
    m: int
    sigma: WarpingFunction
    spec: str = field(default="", compare=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.m!r}")

    @property
    def omega(self):
        """Volume of the unit (m-1)-sphere."""
        return 2.0 * math.pi ** (self.m / 2.0) / math.gamma(self.m / 2.0)


# ---------------------------------------------------------------- curvature

@dataclass(frozen=True)
class CurvatureSample:
    t: float
    sec_radial: float
    sec_tangential: float  # nan when m == 2
    ric_radial: float
    ric_tangential: float


def curvature_local(M, p, tau):
    """Vectorised (sec_radial, sec_tangential, ric_radial, ric_tangential)."""
    s, d1, d2 = M.sigma.eval_local(p, tau)
    sec_r = -d2 / s
    sec_t = (1.0 - d1 * d1) / (s * s)
    ric_r = (M.m - 1) * sec_r
    if M.m == 2:
        ric_t = sec_r.copy()
        sec_t = np.full(sec_r.shape, np.nan)
    else:
        ric_t = sec_r + (M.m - 2) * sec_t
    return sec_r, sec_t, ric_r, ric_t


def curvature_at(M: ModelManifold, t) -> CurvatureSample:
    t = float(t)
    if not t > 0:
        raise ValueError("curvature needs t > 0")
    p, tau = M.sigma.locate(np.array([t]))
    sr, st, rr, rt = (float(x[0]) for x in curvature_local(M, p, tau))
    return CurvatureSample(t, sr, st, rr, rt)


def ricci_extremes(M: ModelManifold, a, b, n_uniform=2001, per_piece=33):
    """(inf, sup) of the Ricci eigenvalues over [a, b] on a grid refined
    through every piece of sigma."""
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    p, tau = M.sigma.sample(a, b, n_uniform=n_uniform, per_piece=per_piece)
    _, _, rr, rt = curvature_local(M, p, tau)
    both = np.concatenate([rr, rt])
    return float(np.min(both)), float(np.max(both))


# ------------------------------------------------------------------- volume

def ball_volume(M: ModelManifold, r) -> float:
    """omega_m * int_0^r sigma^(m-1)."""
    r = float(r)
    if not r > 0:
        raise ValueError("radius must be positive")
    sig = M.sigma
    if sig.poly is None:
        res = quad(lambda x: sig(x) ** (M.m - 1), 0.0, r, rtol=1e-14)
        return M.omega * res.value
    poly = sig.poly
    parts = []
    lefts = poly.lefts
    for i in range(poly.n_pieces):
        lo = lefts[i]
        if lo >= r:
            break
        end = min(poly.widths[i], r - lo)
        c = poly.coeffs[i].copy()
        c[0] += sig.shift
        q = npoly.polyint(npoly.polypow(np.trim_zeros(c, "b") if np.any(c) else [0.0], M.m - 1))
        parts.append(float(npoly.polyval(end, q)))
    return M.omega * math.fsum(parts)


# ------------------------------------------------------------ parabolicity

@dataclass(frozen=True)
class ParabolicityReport:
    verdict: str  # "parabolic" | "non-parabolic" | "inconclusive"
    T: list
    I: list
    increments: list
    ratios: list


def is_parabolic(M: ModelManifold, T0=None, J=16, window=6) -> ParabolicityReport:
    """Classify from I(T) = int_1^T sigma^(1-m) at T = 2^j T0."""
    G = green(M)
    if T0 is None:
        T0 = max(2.0, float(M.sigma.t_max) if np.isfinite(M.sigma.t_max) else 2.0)
    T = T0 * 2.0 ** np.arange(J + 1)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        I = G.value(T)
    d = np.diff(I)
    tail = d[-window:]
    scale = max(abs(I[-1]), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = tail[1:] / tail[:-1]
    if np.all(tail <= 1e-15 * scale):
        verdict = "non-parabolic"
    elif np.all(np.isfinite(q)) and np.max(q) <= 0.9:
        verdict = "non-parabolic"
    elif np.all(np.isfinite(q)) and np.min(q) >= 0.97 and np.all(tail > 0):
        verdict = "parabolic"
    else:
        verdict = "inconclusive"
    return ParabolicityReport(verdict, T.tolist(), I.tolist(), d.tolist(), q.tolist())


# ----------------------------------------------------------- Green function

def _lin_integral(a, b, x0, x1, m):
    """int_{x0}^{x1} (a + b x)^(1-m) dx, stable for small b*(x1-x0)."""
    A = a + b * x0
    dx = x1 - x0
    with np.errstate(divide="ignore", invalid="ignore"):
        if m == 2:
            out = np.where(b == 0, dx / A, np.log1p(b * dx / A) / np.where(b == 0, 1, b))
        else:
            L = np.log1p(b * dx / A)
            out = np.where(
                b == 0, dx * A ** (1.0 - m),
                A ** (2.0 - m) * np.expm1((2.0 - m) * L) / ((2.0 - m) * np.where(b == 0, 1, b)))
    return out


def _lin_inverse(a, b, x0, ds, m):
    """Inverse of _lin_integral in its upper limit."""
    A = a + b * x0
    with np.errstate(divide="ignore", invalid="ignore"):
        bb = np.where(b == 0, 1.0, b)
        if m == 2:
            dx = np.where(b == 0, A * ds, A * np.expm1(b * ds) / bb)
        else:
            arg = (2.0 - m) * b * ds / A ** (2.0 - m)
            L = np.log1p(arg) / (2.0 - m)
            dx = np.where(b == 0, ds * A ** (m - 1.0), A * np.expm1(L) / bb)
    return x0 + dx


class GreenFunction:
    """G(r) = int_1^r sigma^(1-m), anchored at G(1) = 0.

    Every piece p of sigma carries a reference point ``tau_ref[p]`` with known
    value ``G_ref[p]``; inside the piece G is obtained from a local
    antiderivative (closed form for linear pieces, Kronrod panels otherwise).
    The table of G at the piece ends doubles as the inversion table.
    """

    def __init__(self, M: ModelManifold):
        self.M = M
        self.m = M.m
        sig = M.sigma
        self.sigma = sig
        if sig.poly is None:
            self._init_analytic()
        else:
            self._init_piecewise()

    # analytic -------------------------------------------------------------
    def _init_analytic(self):
        sig, m = self.sigma, self.m
        self.closed = None
        if sig.shift == 0.0:
            if sig.kind == "euclidean":
                self.closed = "euc"
                self.s_max = math.inf if m == 2 else 1.0 / (m - 2)
            elif sig.kind == "hyperbolic" and m in (2, 3):
                a = sig.scale
                self.closed = f"hyp{m}"
                self.s_max = (-math.log(math.tanh(a / 2)) if m == 2
                              else a * (1.0 / math.tanh(a) - 1.0))
        if self.closed is None:
            tail = quad(lambda x: sig(x) ** (1.0 - m), 1.0, 1e3, rtol=1e-13).value
            self.s_max = tail  # conservative: coverage limited to t <= 1e3
        self.tau_ref = np.array([1.0])
        self.G_ref = np.array([0.0])
        self.s_left = np.array([-np.inf])
        self.delta = np.array([np.inf])

    def _analytic_value(self, t):
        m, sig = self.m, self.sigma
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.closed == "euc":
                return np.log(t) if m == 2 else (1.0 - t ** (2.0 - m)) / (m - 2)
            a = sig.scale if sig.kind == "hyperbolic" else 1.0
            if self.closed == "hyp2":
                return np.log(np.tanh(a * t / 2)) - math.log(math.tanh(a / 2))
            if self.closed == "hyp3":
                return a * (1.0 / math.tanh(a) - 1.0 / np.tanh(a * t))
        out = np.empty(t.shape)
        for i, ti in np.ndenumerate(t):
            lo, hi = (1.0, ti) if ti >= 1 else (ti, 1.0)
            v = quad(lambda x: sig(x) ** (1.0 - m), lo, hi, rtol=1e-13).value
            out[i] = v if ti >= 1 else -v
        return out

    def _analytic_inverse(self, s):
        m, sig = self.m, self.sigma
        s = np.asarray(s, dtype=np.float64)
        if np.any(s >= self.s_max):
            raise ValueError(f"s beyond the range of G (sup G = {self.s_max})")
        if self.closed == "euc":
            return np.exp(s) if m == 2 else (1.0 - (m - 2) * s) ** (-1.0 / (m - 2))
        a = sig.scale if sig.kind == "hyperbolic" else 1.0
        if self.closed == "hyp2":
            return 2.0 * np.arctanh(math.tanh(a / 2) * np.exp(s)) / a
        if self.closed == "hyp3":
            return np.arctanh(1.0 / (1.0 / math.tanh(a) - s / a)) / a
        return _monotone_inverse(lambda x: self._analytic_value(x),
                                 lambda x: sig(x) ** (1.0 - m), s, 1.0)

    # piecewise ------------------------------------------------------------
    def _init_piecewise(self):
        sig, m = self.sigma, self.m
        poly = sig.poly
        lefts, widths = poly.lefts, poly.widths
        n = poly.n_pieces
        hits = np.nonzero(lefts == 1.0)[0]
        if hits.size == 0:
            raise ConstructionError("piecewise warp needs a breakpoint at t = 1")
        p1 = int(hits[0])
        pp, tt = sig.sample(0.0, sig.t_max, n_uniform=4001, per_piece=9)
        sv = sig.eval_local(pp, tt)[0]
        bad = (sv <= 0) & (sig.global_t(pp, tt) > 0)
        if np.any(bad):
            raise ConstructionError("sigma vanishes on (0, T_max]", t=float(sig.global_t(pp, tt)[bad][0]))
        self.linear = sig.linear
        self.p1 = p1
        delta = np.full(n, np.inf)
        for i in range(n - 1):
            if i == 0 and lefts[0] == 0.0 and sig.shift == 0.0:
                continue  # G(0+) = -inf
            delta[i] = self._piece_integral(i, 0.0, widths[i])
        self.delta = delta
        tau_ref = np.zeros(n)
        G_ref = np.zeros(n)
        acc = []
        for i in range(p1, n):
            G_ref[i] = math.fsum(acc)
            acc.append(delta[i])
        acc = []
        for i in range(p1 - 1, -1, -1):
            tau_ref[i] = widths[i]
            G_ref[i] = -math.fsum(acc)
            acc.append(delta[i])
        self.tau_ref = tau_ref
        self.G_ref = G_ref
        s_left = G_ref.copy()
        s_left[:p1] = G_ref[:p1] - delta[:p1]
        self.s_left = s_left
        self.s_max = math.inf if m == 2 else None
        if m > 2:
            last = poly.coeffs[-1]
            # affine tail: G converges iff m > 2
            self.s_max = float(G_ref[-1] + last[0] ** (2.0 - m) / ((m - 2) * last[1]))

    def _piece_integral(self, p, x0, x1):
        """int_{x0}^{x1} sigma_p^(1-m) d tau (arrays allowed)."""
        sig, m = self.sigma, self.m
        x0 = np.asarray(x0, dtype=np.float64)
        x1 = np.asarray(x1, dtype=np.float64)
        p = np.broadcast_to(np.asarray(p), np.broadcast(x0, x1).shape)
        c = sig.poly.coeffs[p]
        lin = self.linear[p]
        out = np.empty(p.shape)
        if np.any(lin):
            out[lin] = _lin_integral(c[lin, 0] + sig.shift, c[lin, 1],
                                     np.broadcast_to(x0, p.shape)[lin],
                                     np.broadcast_to(x1, p.shape)[lin], m)
        nl = ~lin
        if np.any(nl):
            pn = p[nl]
            a = np.broadcast_to(x0, p.shape)[nl]
            b = np.broadcast_to(x1, p.shape)[nl]
            mid = 0.5 * (a + b)

            def f(x):
                pk = np.broadcast_to(pn[:, None], x.shape)
                v = sig.eval_local(pk.ravel(), x.ravel())[0].reshape(x.shape)
                return v ** (1.0 - m)

            out[nl] = fixed_panel(f, a, mid) + fixed_panel(f, mid, b)
        return out

    # public API -----------------------------------------------------------
    def local_value(self, p, tau):
        if self.sigma.poly is None:
            return self._analytic_value(tau)
        p = np.asarray(p)
        return self.G_ref[p] + self._piece_integral(p, self.tau_ref[p], tau)

    def value(self, t):
        p, tau = self.sigma.locate(t)
        return self.local_value(p, tau)

    __call__ = value

    def deriv(self, t, dtype=np.float64):
        """(G', G'') from the derivative oracle of sigma."""
        s, d1, _ = self.sigma.derivs(t)
        s = s.astype(dtype)
        d1 = d1.astype(dtype)
        m = self.m
        return s ** (1 - m), (1 - m) * s ** (-m) * d1

    def locate_s(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.sigma.poly is None:
            return np.zeros(s.shape, dtype=np.int64), s
        p = _kernels.locate(self.s_left, s)
        return p, s - self.G_ref[p]

    def local_inverse(self, p, ds):
        """tau in piece p with G = G_ref[p] + ds."""
        if self.sigma.poly is None:
            return self._analytic_inverse(ds)
        sig, m = self.sigma, self.m
        p = np.asarray(p)
        ds = np.asarray(ds, dtype=np.float64)
        p, ds = np.broadcast_arrays(p, ds)
        out = np.empty(ds.shape)
        c = sig.poly.coeffs[p]
        x0 = self.tau_ref[p]
        lin = self.linear[p]
        if np.any(lin):
            out[lin] = _lin_inverse(c[lin, 0] + sig.shift, c[lin, 1], x0[lin], ds[lin], m)
        nl = ~lin
        if np.any(nl):
            out[nl] = self._newton_local(p[nl], x0[nl], ds[nl])
        w = sig.poly.widths[p]
        return np.clip(out, 0.0, w)

    def _newton_local(self, p, x0, ds):
        sig, m = self.sigma, self.m
        w = sig.poly.widths[p]
        lo = np.zeros(p.shape)
        hi = w.copy()
        s0 = sig.eval_local(p, x0)[0]
        x = np.clip(x0 + ds * s0 ** (m - 1), lo, hi)
        for _ in range(60):
            F = self._piece_integral(p, x0, x) - ds
            fp = sig.eval_local(p, x)[0] ** (1.0 - m)
            lo = np.where(F < 0, x, lo)
            hi = np.where(F > 0, x, hi)
            xn = x - F / fp
            outside = (xn <= lo) | (xn >= hi)
            xn = np.where(outside, 0.5 * (lo + hi), xn)
            step = np.abs(xn - x)
            x = xn
            if np.all(step <= 4e-16 * np.maximum(w, 1e-300)):
                break
        return x

    def inverse(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.s_max is not None and np.any(s >= self.s_max):
            raise ValueError(f"s beyond the range of G (sup G = {self.s_max})")
        p, ds = self.locate_s(s)
        tau = self.local_inverse(p, ds)
        return self.sigma.global_t(p, tau)

    def inverse_local(self, s):
        """(piece, tau) of G^{-1}(s)."""
        p, ds = self.locate_s(s)
        return p, self.local_inverse(p, ds)


def _monotone_inverse(G, dG, s, x0, max_iter=200):
    """Bracketed Newton for an increasing G: solve G(x) = s for x > 0."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.empty(s.shape)
    for i, si in np.ndenumerate(s):
        lo, hi = x0, x0
        if G(np.array([x0]))[0] < si:
            while G(np.array([hi]))[0] < si:
                lo, hi = hi, hi * 2.0
        else:
            while G(np.array([lo]))[0] > si:
                hi, lo = lo, lo * 0.5
        x = 0.5 * (lo + hi)
        for _ in range(max_iter):
            F = G(np.array([x]))[0] - si
            if F == 0:
                break
            if F < 0:
                lo = x
            else:
                hi = x
            xn = x - F / dG(np.array([x]))[0]
            if not lo < xn < hi:
                xn = 0.5 * (lo + hi)
            if abs(xn - x) <= 1e-15 * x:
                x = xn
                break
            x = xn
        out[i] = x
    return out


def green(M: ModelManifold) -> GreenFunction:
    return GreenFunction(M)


def check_green_harmonic(M: ModelManifold, grid) -> float:
    """max |G'' + (m-1)(sigma'/sigma) G'| sigma^(m-1) over ``grid``.

    Evaluated in extended precision from the float64 oracle values so that
    steep ramps (sigma'/sigma ~ 1e7) do not drown the identity in rounding.
    """
    G = green(M)
    grid = np.asarray(grid, dtype=np.float64)
    g1, g2 = G.deriv(grid, dtype=np.longdouble)
    s, d1, _ = M.sigma.derivs(grid)
    s = s.astype(np.longdouble)
    d1 = d1.astype(np.longdouble)
    res = np.abs(g2 + (M.m - 1) * (d1 / s) * g1) * s ** (M.m - 1)
    return float(np.max(res))
