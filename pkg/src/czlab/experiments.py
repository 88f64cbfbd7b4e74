"""Inequality harnesses on model manifolds.

Each harness returns a plain dataclass report: ``cells`` (one dict per
computed case, in input order) plus ``verdicts`` (named booleans).  Nothing
here raises on a failed inequality; failures are data.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import ModelManifold, ball_volume, green, ricci_extremes
from .quadrature import AccuracyError, quad
from .radialcalc import (
    BumpSum,
    NormTriple,
    PiecewiseProfile,
    RadialProfile,
    build_phi,
    compose,
    lemma_norms,
    lp_norm,
    radial_norms,
)
from .warpfn import SawtoothSpec, build_sawtooth_warp, quintic_hermite

log = logging.getLogger(__name__)

DEFAULT_SEED = 7
BAND_FACTOR = 4.0  # allowed max/min spread of an envelope-normalised sequence
TREND_FACTOR = 0.7
TREND_LAG = 4

__all__ = [
    "DEFAULT_SEED",
    "Report",
    "CZReport",
    "BochnerRequest",
    "DoublingSpec",
    "NegricInput",
    "random_bump_family",
    "run_counterexample",
    "run_scaling",
    "check_sandwich_bounds",
    "check_bochner_cz2",
    "check_interpolation",
    "check_doubling",
    "cutoff_template",
    "make_and_check_cutoffs",
    "negric_constants",
]


@dataclass
class Report:
    experiment: str
    cells: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(bool(v) for v in self.verdicts.values())


# ------------------------------------------------------------ random family

def random_bump_family(n, lo, hi, seed=DEFAULT_SEED, max_bumps=3):
    """``n`` BumpSum members supported in [lo, hi].

    Per member: 1..max_bumps bumps; half-width w ~ U(0.1, 0.3)*(hi-lo),
    centre ~ U(lo+w, hi-w), amplitude ~ sign*U(0.2, 1).  Members are drawn
    sequentially, so the first n of a 2n family equal the n family.
    """
    rng = np.random.default_rng(seed)
    L = hi - lo
    out = []
    for _ in range(n):
        nb = int(rng.integers(1, max_bumps + 1))
        w = rng.uniform(0.1, 0.3, nb) * L
        c = rng.uniform(lo + w, hi - w)
        a = rng.choice([-1.0, 1.0], nb) * rng.uniform(0.2, 1.0, nb)
        out.append(BumpSum(c, w, a))
    return out


# ----------------------------------------------------------- counterexample

@dataclass(frozen=True)
class CZReport:
    k: int
    epsilon_k: float
    norms: NormTriple | None
    hess_full: float = float("nan")
    hess_full_err: float = float("nan")
    ratio: float = float("nan")
    status: str = "ok"

    @classmethod
    def from_norms(cls, k, eps, norms, full):
        ratio = math.sqrt(norms.hess_sq) / (math.sqrt(norms.u_sq) + math.sqrt(norms.lap_sq))
        return cls(k, eps, norms, full.hess_sq, full.hess_err, ratio)

    def row(self):
        n = self.norms
        nan = float("nan")
        return dict(k=self.k, epsilon_k=self.epsilon_k,
                    hess_sq=n.hess_sq if n else nan, lap_sq=n.lap_sq if n else nan,
                    u_sq=n.u_sq if n else nan, hess_full=self.hess_full,
                    ratio=self.ratio, status=self.status)


def _cz_cell(M, k, eps, rtol):
    phi, a, b = build_phi(k)
    f = compose(M, phi, a, b)
    try:
        norms = lemma_norms(M, f, rtol=rtol)
        full = radial_norms(M, f, hess="full", rtol=rtol)
    except AccuracyError as exc:
        log.warning("cell k=%d failed: %s", k, exc)
        return CZReport(k, eps, None, status="accuracy-failure")
    return CZReport.from_norms(k, eps, norms, full)


def _band(x):
    x = np.asarray(x, dtype=float)
    return float(np.max(x) / np.min(x)) if np.all(x > 0) else float("inf")


def run_counterexample(spec: SawtoothSpec, ks=None, rtol=1e-10) -> Report:
    """CZ ratios of u_k = phi_k(G) on the sawtooth plane, with envelope fits."""
    warp = build_sawtooth_warp(spec)
    M = ModelManifold(2, warp)
    ks = list(range(1, spec.k_max + 1)) if ks is None else list(ks)
    reports = []
    for k in ks:
        eps = spec.eps[k - 1] if k <= len(spec.eps) else float("nan")
        reports.append(_cz_cell(M, k, eps, rtol))
    rep = Report("counterexample", cells=[r.row() for r in reports])
    good = [r for r in reports if r.status == "ok"]
    ratios = np.array([r.ratio for r in good])
    kk = np.array([r.k for r in good], dtype=float)
    if len(good) >= 2:
        u_env = np.array([r.norms.u_sq for r in good]) / np.exp(2 * kk)
        l_env = np.array([r.norms.lap_sq for r in good]) * np.exp(2 * kk)
        h_env = (np.array([r.norms.hess_sq for r in good]) * np.exp(2 * kk)
                 * np.array([r.epsilon_k for r in good]))
        slope = float(np.polyfit(kk, np.log([r.norms.hess_sq for r in good]), 1)[0])
        rep.summary.update(
            C_u=float(np.max(u_env)), C_lap=float(np.max(l_env)), c_H=float(np.min(h_env)),
            band_u=_band(u_env), band_lap=_band(l_env), band_hess=_band(h_env),
            ratio_growth=float(ratios[-1] / ratios[0]), log_hess_slope_in_k=slope)
    teeth = spec.teeth > 0
    rep.verdicts["all_cells_ok"] = len(good) == len(reports)
    if teeth and len(good) >= 2:
        rep.verdicts["ratio_increasing"] = bool(np.all(np.diff(ratios) > 0))
        rep.verdicts["ratio_growth_ge_100"] = rep.summary["ratio_growth"] >= 100.0
        for name in ("band_u", "band_lap", "band_hess"):
            rep.verdicts[f"{name}_within_{BAND_FACTOR:g}"] = rep.summary[name] <= BAND_FACTOR
    elif len(good) >= 2:
        rep.verdicts["ratio_bounded"] = float(ratios.max() / ratios.min()) <= 2.0
    rep.summary["windows"] = warp.meta.get("windows", [])
    return rep


def run_scaling(k=1, eps_list=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), rho=0.1, teeth=1,
                rtol=1e-10) -> Report:
    """Slope of log(hess_sq) against log(1/eps) with the k-th tooth width eps.

    Earlier windows (j < k) carry teeth of width min(0.2, eps * 2^(k-j)) so
    the schedule stays strictly decreasing.
    """
    rep = Report("scaling")
    xs, ys = [], []
    for eps in eps_list:
        sched = tuple(min(0.2, eps * 2.0 ** (k - j)) for j in range(1, k + 1))
        spec = SawtoothSpec(k, sched, rho, teeth)
        M = ModelManifold(2, build_sawtooth_warp(spec))
        cell = _cz_cell(M, k, eps, rtol)
        rep.cells.append(cell.row())
        if cell.status == "ok":
            xs.append(math.log(1.0 / eps))
            ys.append(math.log(cell.norms.hess_sq))
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 else float("nan")
    rep.summary["slope"] = slope
    rep.verdicts["slope_within_0.15_of_1"] = abs(slope - 1.0) <= 0.15
    return rep


# ----------------------------------------------------------------- sandwich

def check_sandwich_bounds(M: ModelManifold, s_grid, t_grid, k_range=None, rtol=1e-12) -> Report:
    """The log/exp envelopes of G for a plane whose warp lies in [t, t+1]."""
    G = green(M)
    s = np.asarray(s_grid, dtype=float)
    s = s[s > 0]
    t = np.asarray(t_grid, dtype=float)
    t = t[t > 1]
    rep = Report("sandwich")

    def chain(name, x, lo, val, hi):
        tol = rtol * np.maximum(np.abs(val), 1.0)
        bad = (val < lo - tol) | (val > hi + tol)
        for i in np.nonzero(bad)[0]:
            rep.cells.append(dict(chain=name, x=float(x[i]), lower=float(lo[i]),
                                  value=float(val[i]), upper=float(hi[i])))
        rep.verdicts[name] = not bool(np.any(bad))

    Gt = G.value(t)
    chain("log((t+1)/2) <= G(t) <= log t", t, np.log((t + 1) / 2), Gt, np.log(t))
    Ginv = G.inverse(s)
    chain("e^s <= G^-1(s) <= 2e^s - 1", s, np.exp(s), Ginv, 2 * np.exp(s) - 1)
    chain("e^s <= sigma(G^-1(s)) <= 2e^s", s, np.exp(s), M.sigma(Ginv), 2 * np.exp(s))
    if k_range is None:
        k_range = range(1, int(np.floor(s.max())) if s.size else 1)
    ok_h = True
    for k in k_range:
        lo, hi = G.inverse(np.array([float(k), float(k + 1)]))
        h = int(math.ceil(lo))
        fits = h + 1 <= hi
        gap_ok = hi - lo >= math.exp(k) * (math.e - 2) + 1 - rtol * hi
        rep.summary[f"k{k}"] = dict(G_inv_k=float(lo), G_inv_k1=float(hi),
                                    h=h if fits else None, gap=float(hi - lo))
        ok_h = ok_h and bool(fits and gap_ok)
    rep.verdicts["integer window inside [G^-1(k), G^-1(k+1)]"] = ok_h
    return rep


# ------------------------------------------------------------------ Bochner

@dataclass
class BochnerRequest:
    manifold: ModelManifold
    family: list
    eps_grid: tuple = (0.25, 1.0, 4.0)
    C: float | None = None

    def __post_init__(self):
        if not self.family:
            raise ValueError("family must be nonempty")
        if self.C is not None and self.C < 0:
            raise ValueError("C must be >= 0")
        if any(e <= 0 for e in self.eps_grid):
            raise ValueError("Young parameters must be positive")


def _support_union(M, family):
    lo = min(u.support_r(M)[0] for u in family)
    hi = max(u.support_r(M)[1] for u in family)
    return lo, hi


def check_bochner_cz2(req: BochnerRequest, rtol=1e-11, tol=1e-8) -> Report:
    """Margins RHS - |Hess u|^2 for both readings of the first coefficient."""
    M = req.manifold
    C = req.C
    if C is None:
        lo, hi = _support_union(M, req.family)
        ric_min, _ = ricci_extremes(M, max(lo, 1e-6), hi)
        C = math.sqrt(max(0.0, -ric_min))
    rep = Report("bochner", summary=dict(C=C))
    worst_d, worst_l = math.inf, math.inf
    for i, u in enumerate(req.family):
        n = radial_norms(M, u, hess="full", rtol=rtol)
        for eps in req.eps_grid:
            tail = (1.0 + C * C / (2 * eps * eps)) * n.lap_sq
            rhs_d = 0.5 * C * C * eps * eps * n.u_sq + tail
            rhs_l = 0.5 * C * eps * eps * n.u_sq + tail
            md, ml = rhs_d - n.hess_sq, rhs_l - n.hess_sq
            rd, rl = md / rhs_d, ml / rhs_l
            worst_d, worst_l = min(worst_d, rd), min(worst_l, rl)
            rep.cells.append(dict(member=i, eps=eps, hess_sq=n.hess_sq, u_sq=n.u_sq,
                                  lap_sq=n.lap_sq, rhs_derived=rhs_d, rhs_literal=rhs_l,
                                  margin_derived=md, margin_literal=ml))
    rep.summary.update(worst_rel_margin_derived=worst_d, worst_rel_margin_literal=worst_l)
    rep.verdicts["derived_margins_nonnegative"] = worst_d >= -tol
    return rep


# ------------------------------------------------------------ interpolation

def _interp_constants(M, u, p, eps_grid, rtol):
    g = lp_norm(M, "grad", u, p, rtol).value
    n0 = lp_norm(M, "u", u, p, rtol).value
    h = lp_norm(M, "hess", u, p, rtol).value
    lap = lp_norm(M, "laplacian", u, p, rtol).value
    if n0 == 0.0:
        return None
    row = dict(grad=g, u=n0, hess=h, lap=lap,
               c1=g / (2.0 * math.sqrt(n0 * h)),
               c2=g / math.sqrt(n0 * lap),
               c3=g / (lap + n0))
    for e in eps_grid:
        row[f"cz3_eps_{e:g}"] = g / (n0 / e + e * h)
    return row


def check_interpolation(M, family, p=2.0, eps_grid=(0.5, 1.0, 2.0), rtol=1e-11,
                        stability=0.10) -> Report:
    """Empirical constants of the three gradient interpolation inequalities.

    Stability compares the sup over the first half of ``family`` with the
    sup over all of it.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    rep = Report("interpolation", summary=dict(p=p, multiplicative_applies=p <= 2))
    rows = []
    for i, u in enumerate(family):
        row = _interp_constants(M, u, p, eps_grid, rtol)
        if row is None:
            continue
        row["member"] = i
        rows.append(row)
    rep.cells = rows
    if not rows:
        rep.verdicts["nonempty"] = False
        return rep
    half = rows[: max(1, len(rows) // 2)]
    keys = ["c1", "c2", "c3"] + [f"cz3_eps_{e:g}" for e in eps_grid]
    for key in keys:
        full = max(r[key] for r in rows)
        part = max(r[key] for r in half)
        rep.summary[f"sup_{key}"] = full
        rep.summary[f"sup_{key}_half"] = part
        if key in ("c1", "c2", "c3"):
            rep.verdicts[f"{key}_finite"] = math.isfinite(full)
            rep.verdicts[f"{key}_stable"] = abs(full - part) <= stability * full
    return rep


# ----------------------------------------------------------------- doubling

@dataclass(frozen=True)
class DoublingSpec:
    D: float
    delta: float
    r_grid: tuple
    t_grid: tuple

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if not 0 <= self.delta < 2:
            raise ValueError("delta must lie in [0, 2)")
        if any(t < 1 for t in self.t_grid):
            raise ValueError("t grid must have t >= 1")
        if any(r <= 0 for r in self.r_grid):
            raise ValueError("r grid must be positive")


def check_doubling(M, spec: DoublingSpec) -> Report:
    """V(tr) <= D t^D exp(t^delta + r^delta) V(r) for pole-centred balls,
    compared in logarithms."""
    rep = Report("doubling", summary=dict(centres="pole only"))
    vols = {}

    def logV(r):
        if r not in vols:
            vols[r] = math.log(ball_volume(M, r))
        return vols[r]

    first = None
    for r in spec.r_grid:
        for t in spec.t_grid:
            lhs = logV(t * r)
            rhs = math.log(spec.D) + spec.D * math.log(t) + t**spec.delta + r**spec.delta + logV(r)
            ok = lhs <= rhs + 1e-12 * max(abs(rhs), 1.0)
            rep.cells.append(dict(r=r, t=t, log_ratio=lhs - logV(r),
                                  log_bound=rhs - logV(r), ok=ok))
            if not ok and first is None:
                first = dict(r=float(r), t=float(t))
    rep.summary["first_violation"] = first
    rep.summary["n_violations"] = sum(not c["ok"] for c in rep.cells)
    rep.verdicts["no_violations"] = first is None
    return rep


# ------------------------------------------------------------------ cutoffs

def cutoff_template(flat=1.5, zero=2.0):
    """C^2 decreasing ramp: 1 on [0, flat], 0 on [zero, inf)."""
    w = zero - flat
    ramp = quintic_hermite(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, w)
    return PiecewiseProfile([0.0, flat, zero], [[1.0], ramp])


class _SmoothedDistance:
    """d~(r) = 1 + psi(r), psi(r) = r for r >= 1, a flat C^2 cap on [0, 1]."""

    def __init__(self, cap=0.5):
        self.cap = cap
        self.c = quintic_hermite(cap, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0)

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        x = np.clip(r, 0.0, 1.0)
        c = self.c
        v = sum(c[j] * x**j for j in range(6))
        d1 = sum(j * c[j] * x ** (j - 1) for j in range(1, 6))
        d2 = sum(j * (j - 1) * c[j] * x ** (j - 2) for j in range(2, 6))
        inside = r < 1.0
        return (1.0 + np.where(inside, v, r), np.where(inside, d1, 1.0),
                np.where(inside, d2, 0.0))

    def inverse(self, d):
        """Smallest r with d~(r) >= d (d~ is increasing)."""
        if d <= 1.0 + self.cap:
            return 0.0
        if d >= 2.0:
            return d - 1.0
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.eval(mid)[0] < d:
                lo = mid
            else:
                hi = mid
        return hi


class _Cutoff(RadialProfile):
    def __init__(self, template, dist, n):
        self.T, self.d, self.n = template, dist, float(n)
        _, zero = template.support
        self.support = (0.0, dist.inverse(zero * self.n))

    def eval(self, r):
        dv, d1, d2 = self.d.eval(r)
        x = dv / self.n
        t0, t1, t2 = self.T.eval(x)
        return t0, t1 * d1 / self.n, t2 * (d1 / self.n) ** 2 + t1 * d2 / self.n


def _trend(vals, lag=TREND_LAG, factor=TREND_FACTOR):
    v = np.asarray(vals, dtype=float)
    if len(v) <= lag:
        return False
    return bool(np.all(v[lag:] <= factor * v[:-lag]))


def make_and_check_cutoffs(M, template=None, n_list=(1, 2, 4, 8, 16, 32, 64), compact=1.0,
                           n_uniform=400, per_piece=9) -> Report:
    """chi_n(r) = T(d~(r)/n): range, exhaustion, and decay of sup|chi_n'| and
    sup|Hess chi_n| over the transition region."""
    T = cutoff_template() if template is None else template
    dist = _SmoothedDistance()
    flat, zero = 1.5, T.support[1]
    rep = Report("cutoffs", summary=dict(n_list=list(n_list)))
    s_vals, h_vals = [], []
    range_ok, exhaust_from = True, None
    for n in n_list:
        chi = _Cutoff(T, dist, n)
        a = max(dist.inverse(flat * n), 1e-3)
        b = dist.inverse(zero * n)
        if b <= a:
            b = a + 1e-3
        p, tau = M.sigma.sample(a, b, n_uniform=n_uniform, per_piece=per_piece)
        r = M.sigma.global_t(p, tau)
        r = np.unique(r[(r >= a) & (r <= b) & (r > 0)])
        pp, tt = M.sigma.locate(r)
        u, u1, u2 = chi.at(M, pp, tt)
        sv, d1, _ = M.sigma.eval_local(pp, tt)
        hess = np.sqrt(u2**2 + (M.m - 1) * (u1 * d1 / sv) ** 2)
        lap = np.abs(u2 + (M.m - 1) * (d1 / sv) * u1)
        full_r = np.linspace(1e-3, b * 1.1, 200)
        vals = chi(full_r)
        range_ok = range_ok and bool(np.all((vals >= -1e-14) & (vals <= 1 + 1e-14)))
        one_on_compact = bool(np.all(np.abs(chi(np.linspace(0, compact, 50)) - 1) <= 1e-14))
        if one_on_compact and exhaust_from is None:
            exhaust_from = n
        if not one_on_compact:
            exhaust_from = None
        s_n, h_n = float(np.max(np.abs(u1))), float(np.max(hess))
        s_vals.append(s_n)
        h_vals.append(h_n)
        rep.cells.append(dict(n=n, r_lo=a, r_hi=b, s_n=s_n, h_n=h_n,
                              l_n=float(np.max(lap)), one_on_compact=one_on_compact))
    rep.summary.update(exhausts_compact_from_n=exhaust_from)
    rep.verdicts["range_in_[0,1]"] = range_ok
    rep.verdicts["equal_one_on_compact_eventually"] = exhaust_from is not None
    rep.verdicts["s_n_decays"] = _trend(s_vals)
    rep.verdicts["h_n_decays"] = _trend(h_vals)
    return rep


# ------------------------------------------------------------------- negric

@dataclass(frozen=True)
class NegricInput:
    m: int
    K: float
    inj: float
    volN: float

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.K < 0 or self.inj <= 0 or self.volN <= 0:
            raise ValueError("K must be >= 0 and inj, volN positive")


def sn(kappa, s):
    """Comparison function: sin(Ks)/K, s, or sinh(Ks)/K for kappa = K^2, 0, -K^2."""
    s = np.asarray(s, dtype=float)
    if kappa > 0:
        K = math.sqrt(kappa)
        return np.sin(K * s) / K
    if kappa < 0:
        K = math.sqrt(-kappa)
        return np.sinh(K * s) / K
    return s


def _alpha(kappa, m, r):
    if r == 0.0:
        return 1.0 / (m - 1)
    v = quad(lambda s: sn(kappa, s) ** (m - 2), 0.0, r, rtol=1e-13).value
    return v / r ** (m - 1)


def _extrema(f, lo, hi, n_grid=401):
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([f(x) for x in grid])
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * vals))
        best = vals[i]
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
        if b > a:
            res = minimize_scalar(lambda x: sign * f(x), bounds=(a, b), method="bounded",
                                  options=dict(xatol=1e-12))
            if sign * res.fun < sign * best:
                best = sign * res.fun
        out.append(float(best))
    return out[0], out[1]


def negric_constants(inp: NegricInput) -> Report:
    """alpha_1, alpha_2 extrema on (0, inj/2] and the two regime constants."""
    m, K, inj = inp.m, inp.K, inp.inj
    half = inj / 2.0
    if K * half >= math.pi:
        raise ValueError("sin(K s) must stay positive on (0, inj/2]; need K*inj/2 < pi")
    a1 = lambda r: _alpha(K * K, m, r)
    a2 = lambda r: _alpha(-K * K, m, r)
    A1, B1 = _extrema(a1, 0.0, half)
    A2, B2 = _extrema(a2, 0.0, half)
    C1 = B2 / A1 * math.sqrt(2.0) ** (m - 1)
    C2 = inp.volN / A1 * (2.0 * math.sqrt(2.0) / inj) ** (m - 1)
    rep = Report("negric", summary=dict(A1=A1, B1=B1, A2=A2, B2=B2, C1=C1, C2=C2,
                                        alpha1_at_half=a1(half), alpha2_at_half=a2(half)))
    rs = np.linspace(0.0, half, 21)
    rep.cells = [dict(r=float(r), alpha1=a1(r), alpha2=a2(r)) for r in rs]
    rep.verdicts["A_le_B"] = A1 <= B1 and A2 <= B2
    rep.verdicts["constants_positive"] = C1 > 0 and C2 > 0
    return rep
