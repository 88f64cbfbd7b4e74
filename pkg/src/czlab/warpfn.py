"""Warping functions sigma for model manifolds dr^2 + sigma(r)^2 g_sphere.

Two families are provided: closed-form warps (flat and constant negative
curvature) and piecewise-polynomial warps.  The piecewise carrier stores each
piece in its own local coordinate ``tau = t - left`` so that very thin pieces
far from the origin keep their resolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _kernels
from .quadrature import fixed_panel

__all__ = [
    "ConstructionError",
    "PiecewisePoly",
    "quintic_hermite",
    "WarpingFunction",
    "SawtoothSpec",
    "StructuralReport",
    "make_analytic_warp",
    "build_sawtooth_warp",
    "check_structural",
]

DEG = 5  # highest stored degree (quintic)
BAND_RTOL = 1e-12


class ConstructionError(RuntimeError):
    """Raised when a warp or Green function cannot be built as requested."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


def quintic_hermite(y0, d0, c0, y1, d1, c1, w):
    """Ascending coefficients (in tau in [0, w]) of the quintic matching value,
    slope and curvature at both ends."""
    # normalised x = tau / w; unknown top three coefficients
    a0, a1, a2 = y0, d0 * w, 0.5 * c0 * w * w
    r0 = y1 * 1.0 - (a0 + a1 + a2)
    r1 = d1 * w - (a1 + 2.0 * a2)
    r2 = c1 * w * w - 2.0 * a2
    # [1 1 1; 3 4 5; 6 12 20] [a3 a4 a5]^T = [r0 r1 r2]
    a3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2
    a4 = -15.0 * r0 + 7.0 * r1 - r2
    a5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2
    scale = np.array([1.0, 1.0 / w, 1.0 / w**2, 1.0 / w**3, 1.0 / w**4, 1.0 / w**5])
    return np.array([a0, a1, a2, a3, a4, a5]) * scale


def _taylor_shift(c, x0):
    """Coefficients of q(x) = p(x0 + x) given ascending coefficients of p."""
    n = len(c)
    out = np.zeros(n)
    for i in range(n):
        for j in range(i + 1):
            out[j] += c[i] * comb(i, j) * x0 ** (i - j)
    return out


@dataclass(frozen=True)
class PiecewisePoly:
    """Pieces ``[left_p, left_p + width_p)``; the final piece is the affine tail.

    Left endpoints are stored as ``anchor + offset`` with an integer anchor so
    that sub-nanometre pieces near t ~ 1e2 keep their offsets exactly.
    """

    anchors: np.ndarray
    offsets: np.ndarray
    widths: np.ndarray
    coeffs: np.ndarray
    hint: np.ndarray = None  # minimum number of quadrature panels per piece

    def __post_init__(self):
        lefts = self.anchors + self.offsets
        if np.any(np.diff(lefts) <= 0) or np.any(self.widths <= 0):
            raise ValueError("piece endpoints must be strictly increasing")
        if not np.isinf(self.widths[-1]):
            raise ValueError("last piece must be the unbounded affine tail")
        if self.hint is None:
            object.__setattr__(self, "hint", np.ones(len(self.widths), dtype=np.int64))

    @classmethod
    def from_pieces(cls, pieces, hints=None):
        """Build from ``(anchor, offset, coeffs, width)`` tuples; appends the
        affine tail using the value and slope at the last right endpoint."""
        anchors = np.array([int(pc[0]) for pc in pieces], dtype=np.int64)
        offsets = np.array([float(pc[1]) for pc in pieces])
        widths = [float(pc[3]) for pc in pieces]
        coeffs = np.zeros((len(pieces) + 1, DEG + 1))
        for i, pc in enumerate(pieces):
            c = np.asarray(pc[2], dtype=float)
            coeffs[i, : len(c)] = c
        last = coeffs[len(pieces) - 1]
        w = widths[-1]
        v, d1, _ = _kernels.horner3_numpy(last[None, :], np.zeros(1, np.int64), np.array([w]))
        end = anchors[-1] + offsets[-1] + w
        ta = int(math.floor(end))
        coeffs[-1, :2] = [v[0], d1[0]]
        anchors = np.append(anchors, ta)
        offsets = np.append(offsets, end - ta)
        widths = np.array(widths + [np.inf])
        h = np.ones(len(widths), dtype=np.int64) if hints is None else np.append(
            np.asarray(hints, dtype=np.int64), 1)
        return cls(anchors, offsets, widths, coeffs, h)

    @property
    def lefts(self):
        return self.anchors + self.offsets

    @property
    def t_max(self):
        return float(self.lefts[-1])

    @property
    def n_pieces(self):
        return len(self.widths)

    def locate(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = _kernels.locate(self.lefts, t)
        tau = (t - self.anchors[p]) - self.offsets[p]
        return p, np.maximum(tau, 0.0)

    def eval_local(self, p, tau):
        return _kernels.horner3(self.coeffs, np.asarray(p), np.asarray(tau, dtype=np.float64))

    def __call__(self, t):
        p, tau = self.locate(t)
        return self.eval_local(p, tau)

    def is_linear(self):
        return np.all(self.coeffs[:, 2:] == 0.0, axis=1)

    def join_residuals(self):
        """Scaled jumps (value, slope*w, curvature*w^2) at interior joins,
        relative to the local magnitude of the two adjoining pieces."""
        n = self.n_pieces - 1
        out = np.zeros((n, 3))
        for i in range(n):
            w0 = self.widths[i]
            w1 = self.widths[i + 1] if np.isfinite(self.widths[i + 1]) else w0
            w = min(w0, w1)
            vl = self.eval_local(np.array([i]), np.array([w0]))
            vr = self.eval_local(np.array([i + 1]), np.array([0.0]))
            mag = max(abs(vl[0][0]), abs(vl[1][0]) * w, abs(vl[2][0]) * w * w, 1e-300)
            out[i] = [abs(vl[0][0] - vr[0][0]) / mag,
                      abs(vl[1][0] - vr[1][0]) * w / mag,
                      abs(vl[2][0] - vr[2][0]) * w * w / mag]
        return out

    def split_at(self, t0):
        """Insert a breakpoint at ``t0`` (no-op if one already exists)."""
        p, tau = self.locate(np.array([t0]))
        p, tau = int(p[0]), float(tau[0])
        if tau == 0.0:
            return self
        c = self.coeffs[p]
        right = _taylor_shift(c, tau)
        a0 = int(math.floor(t0))
        anchors = np.insert(self.anchors, p + 1, a0)
        offsets = np.insert(self.offsets, p + 1, t0 - a0)
        widths = self.widths.copy()
        wr = widths[p] - tau
        widths[p] = tau
        widths = np.insert(widths, p + 1, wr)
        coeffs = np.insert(self.coeffs, p + 1, right, axis=0)
        hint = np.insert(self.hint, p + 1, self.hint[p])
        return PiecewisePoly(anchors, offsets, widths, coeffs, hint)


@dataclass(frozen=True)
class WarpingFunction:
    """sigma with derivative oracle up to order two.

    ``kind`` is ``"euclidean"``, ``"hyperbolic"`` or ``"piecewise"``.  All
    evaluation goes through ``(piece, tau)`` pairs; closed-form warps have a
    single piece whose local coordinate is t itself.
    """

    kind: str
    scale: float = 1.0
    poly: PiecewisePoly | None = None
    shift: float = 0.0
    band_ok: bool | None = None
    min_margin: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    # piece structure ----------------------------------------------------
    @property
    def n_pieces(self):
        return 1 if self.poly is None else self.poly.n_pieces

    @property
    def lefts(self):
        return np.zeros(1) if self.poly is None else self.poly.lefts

    @property
    def widths(self):
        return np.array([np.inf]) if self.poly is None else self.poly.widths

    @property
    def linear(self):
        if self.poly is None:
            return np.array([self.kind == "euclidean"])
        return self.poly.is_linear()

    @property
    def hint(self):
        return np.ones(1, dtype=np.int64) if self.poly is None else self.poly.hint

    @property
    def breakpoints(self):
        """Interior breakpoints including T_max (empty for closed forms)."""
        return np.zeros(0) if self.poly is None else self.poly.lefts[1:]

    @property
    def t_max(self):
        return np.inf if self.poly is None else self.poly.t_max

    def locate(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.poly is None:
            return np.zeros(t.shape, dtype=np.int64), t
        return self.poly.locate(t)

    def global_t(self, p, tau):
        if self.poly is None:
            return np.asarray(tau, dtype=np.float64)
        p = np.asarray(p)
        return (self.poly.anchors[p] + self.poly.offsets[p]) + tau

    # evaluation -----------------------------------------------------------
    def eval_local(self, p, tau):
        tau = np.asarray(tau, dtype=np.float64)
        if self.kind == "euclidean":
            v, d1, d2 = tau.copy(), np.ones(tau.shape), np.zeros(tau.shape)
        elif self.kind == "hyperbolic":
            a = self.scale
            with np.errstate(over="ignore"):
                v = np.sinh(a * tau) / a
                d1 = np.cosh(a * tau)
                d2 = a * np.sinh(a * tau)
        else:
            v, d1, d2 = self.poly.eval_local(np.broadcast_to(p, tau.shape), tau)
        if self.shift:
            v = v + self.shift
        return v, d1, d2

    def derivs(self, t):
        p, tau = self.locate(t)
        return self.eval_local(p, tau)

    def __call__(self, t, nu=0):
        return self.derivs(t)[nu]

    def shifted(self, c):
        return WarpingFunction(self.kind, self.scale, self.poly, self.shift + c)

    def sample(self, a, b, n_uniform=1000, per_piece=17):
        """Sample points on [a, b]: a uniform grid, every breakpoint, and
        ``per_piece`` local points inside each piece meeting [a, b]."""
        tg = np.linspace(a, b, n_uniform)
        p, tau = self.locate(tg)
        ps, taus = [p], [tau]
        if self.poly is not None:
            lefts, widths = self.poly.lefts, self.poly.widths
            for i in range(self.n_pieces):
                lo, w = lefts[i], widths[i]
                hi = lo + w
                if hi < a or lo > b:
                    continue
                t0 = max(0.0, a - lo)
                t1 = min(w, b - lo)
                if t1 <= t0:
                    continue
                loc = np.linspace(t0, t1, per_piece)
                ps.append(np.full(per_piece, i, dtype=np.int64))
                taus.append(loc)
        return np.concatenate(ps), np.concatenate(taus)

    def panels(self, a, b, extra=()):
        """Quadrature panels covering [a, b] split at every piece boundary,
        each piece carrying at least its hinted number of sub-panels."""
        cuts = np.unique(np.concatenate([[a, b], np.asarray(extra, dtype=float)]))
        cuts = cuts[(cuts >= a) & (cuts <= b)]
        P, A, B = [], [], []
        if self.poly is None:
            edges = cuts
            P.append(np.zeros(len(edges) - 1, dtype=np.int64))
            A.append(edges[:-1])
            B.append(edges[1:])
            return np.concatenate(P), np.concatenate(A), np.concatenate(B)
        lefts, widths, hint = self.poly.lefts, self.poly.widths, self.poly.hint
        first = int(_kernels.locate(lefts, np.array([a]))[0])
        last = int(_kernels.locate(lefts, np.array([b]))[0])
        for i in range(first, last + 1):
            lo, w = lefts[i], widths[i]
            t0 = max(0.0, a - lo) if i == first else 0.0
            t1 = min(w, b - lo) if i == last else w
            if t1 <= t0:
                continue
            inner = cuts[(cuts > lo + t0) & (cuts < lo + t1)] - lo
            edges = np.concatenate([[t0], inner, [t1]])
            n = int(hint[i])
            if n > 1:
                edges = np.unique(np.concatenate(
                    [edges, t0 + (t1 - t0) * np.arange(1, n) / n]))
            P.append(np.full(len(edges) - 1, i, dtype=np.int64))
            A.append(edges[:-1])
            B.append(edges[1:])
        return np.concatenate(P), np.concatenate(A), np.concatenate(B)


def make_analytic_warp(kind, scale=1.0):
    """sigma(t) = t (``euclidean``) or sinh(a t)/a (``hyperbolic``)."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    if kind not in ("euclidean", "hyperbolic"):
        raise ValueError(f"unknown analytic warp kind {kind!r}")
    return WarpingFunction(kind, float(scale) if kind == "hyperbolic" else 1.0,
                           band_ok=(kind == "euclidean"))


# ------------------------------------------------------------------ sawtooth

@dataclass(frozen=True)
class SawtoothSpec:
    """Oscillating warp: in the k-th window, ``teeth`` triangular teeth of
    ramp width ``eps[k-1]`` riding on sigma = t, corners blended over
    ``rho * eps``.  ``windows`` optionally fixes the integer window starts."""

    k_max: int
    eps: tuple
    rho: float = 0.1
    teeth: int = 1
    windows: tuple | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if self.k_max < 0 or len(eps) != self.k_max:
            raise ValueError("need one eps per window")
        if any(e <= 0 or e >= 0.25 for e in eps):
            raise ValueError("eps_k must lie in (0, 1/4)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps schedule must be strictly decreasing")
        if not 0 < self.rho <= 0.25:
            raise ValueError("rho must lie in (0, 1/4]")
        if self.teeth < 0:
            raise ValueError("teeth must be >= 0")
        if self.windows is not None:
            w = sorted(int(h) for h in self.windows)
            if len(w) != self.k_max:
                raise ValueError("need one window per k")
            if any(b < a + 1 for a, b in zip(w, w[1:])):
                raise ValueError("tooth windows overlap")
            object.__setattr__(self, "windows", tuple(int(h) for h in self.windows))

    @classmethod
    def default(cls, k_max=4, gamma=1.0, rho=0.1, teeth=1):
        """eps_k = exp(-(4 + gamma) k)."""
        eps = tuple(math.exp(-(4.0 + gamma) * k) for k in range(1, k_max + 1))
        return cls(k_max, eps, rho, teeth)


def _block_pieces(h, center_off, eps, rho, teeth):
    """Pieces for one tooth block anchored at integer ``h``.

    Vertices at offsets ``v_i = start + i*eps``; the offset f = sigma - t is
    0 at even vertices and 1 at odd ones, so ramps carry sigma' = 1 +- 1/eps.
    """
    n = 2 * teeth
    half_blend = 0.5 * rho * eps
    start = center_off - teeth * eps
    slopes = [1.0] + [1.0 + (1.0 / eps if i % 2 == 0 else -1.0 / eps) for i in range(n)] + [1.0]
    pieces, hints = [], []
    for i in range(n + 1):
        v = start + i * eps
        fv = float(i % 2)
        sv = (h + v) + fv
        s1, s2 = slopes[i], slopes[i + 1]
        w = rho * eps
        # solve against a local value origin; the global level goes in c0 only
        c = quintic_hermite(0.0, s1, 0.0, (s1 + s2) * half_blend, s2, 0.0, w)
        c[0] = sv - s1 * half_blend
        pieces.append((h, v - half_blend, c, w))
        hints.append(4)
        if i < n:
            lo = v + half_blend
            f0 = rho / 2 if i % 2 == 0 else 1.0 - rho / 2
            pieces.append((h, lo, np.array([(h + lo) + f0, s2]), eps * (1.0 - rho)))
            hints.append(8)
    return pieces, hints, start - half_blend, start + n * eps + half_blend


def _piece_log_integral(c, w):
    """int_0^w dtau / sigma(tau) for one piece (the m=2 Green increment)."""
    if np.all(c[2:] == 0.0):
        a, b = c[0], c[1]
        if b == 0.0:
            return w / a
        return math.log1p(b * w / a) / b
    cc = c[None, :]
    def f(x):
        v, _, _ = _kernels.horner3_numpy(cc, np.zeros(x.size, np.int64), x.ravel())
        return 1.0 / v.reshape(x.shape)
    # two halves for a cheap self-check of the single-panel rule
    whole = float(fixed_panel(f, np.array(0.0), np.array(w)))
    halves = float(np.sum(fixed_panel(f, np.array([0.0, w / 2]), np.array([w / 2, w]))))
    if abs(whole - halves) > 1e-13 * abs(halves):
        raise ConstructionError("blend piece too coarse for single-panel rule")
    return halves


def build_sawtooth_warp(spec: SawtoothSpec) -> WarpingFunction:
    """Piecewise C^2 sawtooth warp confined to the band t <= sigma <= t + 1.

    Teeth are placed window by window.  Below every placed block sigma = t,
    so the two-dimensional Green function is ``G(t) = log t - D`` past the
    last block, where D is the accumulated log defect of the blocks.  The k-th
    block is centred at G^{-1}(k + 3/8), the middle of the interval where the
    test profile phi_k has slope exactly 2.
    """
    pieces = [(0, 0.0, np.array([0.0, 1.0]), 1.0)]
    hints = [1]
    cursor = 1.0  # global t where the next identity piece starts
    defect = 0.0
    windows = []
    active = spec.teeth > 0 and spec.k_max > 0
    for k in range(1, spec.k_max + 1 if active else 1):
        eps = spec.eps[k - 1]
        target = math.exp(k + 0.375 + defect)
        lo_k, hi_k = math.exp(k + defect), math.exp(k + 1 + defect)
        if spec.windows is not None:
            h = spec.windows[k - 1]
        else:
            h = int(math.floor(target))
            if h < lo_k:
                h = int(math.ceil(lo_k))
        if h + 1 > hi_k or h < cursor:
            raise ConstructionError(f"window [{h}, {h + 1}] for k={k} does not fit", t=h)
        half = spec.teeth * eps + 0.5 * spec.rho * eps
        center = min(max(target - h, half), 1.0 - half)
        block, bh, b_lo, b_hi = _block_pieces(h, center, eps, spec.rho, spec.teeth)
        start_global = h + b_lo
        a0 = int(math.floor(cursor))
        pieces.append((a0, cursor - a0, np.array([cursor, 1.0]), start_global - cursor))
        hints.append(1)
        pieces.extend(block)
        hints.extend(bh)
        end_global = h + b_hi
        block_G = math.fsum(_piece_log_integral(np.pad(c, (0, DEG + 1 - len(c))), w)
                            for _, _, c, w in block)
        defect += math.log(end_global / start_global) - block_G
        cursor = end_global
        windows.append(dict(k=k, h=h, eps=eps, center=h + center,
                            start=start_global, end=end_global))
    t_max = float(math.ceil(math.exp(spec.k_max + 1 + defect)) + 1)
    a0 = int(math.floor(cursor))
    pieces.append((a0, cursor - a0, np.array([cursor, 1.0]), t_max - cursor))
    hints.append(1)
    poly = PiecewisePoly.from_pieces(pieces, hints)
    warp = WarpingFunction("piecewise", poly=poly, meta=dict(windows=windows, spec=spec))
    ok, margin, bad_t = _certify_band(warp, windows)
    if not ok:
        raise ConstructionError(f"band t <= sigma <= t+1 violated at t={bad_t}", t=bad_t)
    return WarpingFunction("piecewise", poly=poly, band_ok=True, min_margin=margin,
                           meta=dict(windows=windows, spec=spec))


def _certify_band(warp, windows, n_grid=1000):
    ps, taus = [], []
    for w in windows:
        p, tau = warp.sample(w["h"], w["h"] + 1.0, n_uniform=n_grid, per_piece=33)
        ps.append(p)
        taus.append(tau)
    p, tau = warp.sample(1.0, warp.t_max, n_uniform=n_grid, per_piece=5)
    ps.append(p)
    taus.append(tau)
    p, tau = np.concatenate(ps), np.concatenate(taus)
    sig = warp.eval_local(p, tau)[0]
    t = warp.global_t(p, tau)
    slack = BAND_RTOL * t
    low = sig < t - slack
    high = sig > t + 1.0 + slack
    bad = low | high
    margin = float(np.min(sig / t))
    if np.any(bad):
        return False, margin, float(t[bad][0])
    return True, margin, None


def sawtooth_from_params(k_max=4, gamma=1.0, rho=0.1, teeth=1):
    return build_sawtooth_warp(SawtoothSpec.default(k_max, gamma, rho, teeth))


# ---------------------------------------------------------------- structure

@dataclass(frozen=True)
class StructuralReport:
    sigma0: float
    dsigma0: float
    d2sigma0: float
    min_sigma: float
    structural_ok: bool
    band_ok: bool


def check_structural(sigma: WarpingFunction, grid) -> StructuralReport:
    """Structural conditions at the pole and positivity / band on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    s0, d0, dd0 = (float(x[0]) for x in sigma.derivs(np.array([0.0])))
    vals = sigma(grid[grid > 0])
    min_sigma = float(np.min(vals)) if vals.size else float("nan")
    ok = abs(s0) <= 1e-14 and abs(d0 - 1.0) <= 1e-12 and abs(dd0) <= 1e-12 and min_sigma > 0
    tb = grid[grid > 1]
    sb = sigma(tb)
    slack = BAND_RTOL * tb
    band = bool(np.all((sb >= tb - slack) & (sb <= tb + 1 + slack)))
    return StructuralReport(s0, d0, dd0, min_sigma, bool(ok), band)
