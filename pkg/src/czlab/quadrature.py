"""Adaptive Gauss-Kronrod (7/15) quadrature over piece-local panels.

A panel is a triple ``(p, a, b)``: a piece index and an interval in that
piece's local coordinate.  Integrands receive node arrays ``(p, x)`` and
return values, so callers can evaluate everything in local coordinates and
never reconstruct global abscissae for thin pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

# QUADPACK qk15 abscissae/weights (positive half, outermost first).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Ascending node order on [-1, 1]; Gauss-7 nodes sit at the odd positions.
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
WG = np.concatenate([_WG[:-1], _WG[::-1]])


class AccuracyError(RuntimeError):
    """Requested tolerance not reached; carries the best estimate."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_panels: int


def panel_rule(f, p, a, b):
    """One Kronrod-15 / Gauss-7 evaluation per panel.  Returns (K, |K-G|)."""
    p = np.asarray(p, dtype=np.int64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    half = 0.5 * (b - a)
    mid = a + half
    x = mid[:, None] + half[:, None] * NODES[None, :]
    # keep the end nodes inside the panel under rounding
    x = np.clip(x, a[:, None], b[:, None])
    pp = np.broadcast_to(p[:, None], x.shape)
    fv = np.asarray(f(pp.ravel(), x.ravel()), dtype=np.float64).reshape(x.shape)
    k, g = _kernels.gk_reduce(fv, half, WK, WG)
    return k, np.abs(k - g)


def integrate(f, p, a, b, rtol=1e-10, atol=0.0, max_panels=400_000,
              max_rounds=80):
    """Integrate ``f`` over the union of panels ``(p[i], a[i], b[i])``.

    Global adaptive bisection: every round splits the panels whose error
    exceeds half the mean admissible error.  Panel sums are accumulated with
    ``math.fsum``.
    """
    p = np.atleast_1d(np.asarray(p, dtype=np.int64))
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if p.size == 0:
        return QuadResult(0.0, 0.0, 0)
    vals, errs = panel_rule(f, p, a, b)
    for _ in range(max_rounds):
        total = math.fsum(vals)
        err = math.fsum(errs)
        tol = max(atol, rtol * abs(total))
        if err <= tol or not np.isfinite(err):
            break
        if p.size > max_panels:
            raise AccuracyError(
                f"quadrature exceeded {max_panels} panels", total, err)
        split = errs > 0.5 * tol / p.size
        mid = 0.5 * (a[split] + b[split])
        sp, sa, sb = p[split], a[split], b[split]
        cp = np.concatenate([sp, sp])
        ca = np.concatenate([sa, mid])
        cb = np.concatenate([mid, sb])
        cv, ce = panel_rule(f, cp, ca, cb)
        keep = ~split
        p = np.concatenate([p[keep], cp])
        a = np.concatenate([a[keep], ca])
        b = np.concatenate([b[keep], cb])
        vals = np.concatenate([vals[keep], cv])
        errs = np.concatenate([errs[keep], ce])
    else:
        total = math.fsum(vals)
        err = math.fsum(errs)
        raise AccuracyError("quadrature did not converge", total, err)
    if not np.isfinite(total):
        raise AccuracyError("non-finite integrand", total, err)
    return QuadResult(total, err, int(p.size))


def quad(func, lo, hi, rtol=1e-12, atol=0.0, breaks=(), min_panels=1):
    """Integrate a plain function of one global variable over [lo, hi]."""
    edges = np.unique(np.concatenate([[lo, hi], np.asarray(breaks, float)]))
    edges = edges[(edges >= lo) & (edges <= hi)]
    if min_panels > 1:
        edges = np.unique(np.concatenate(
            [np.linspace(e0, e1, min_panels + 1)
             for e0, e1 in zip(edges[:-1], edges[1:])]))
    p = np.zeros(len(edges) - 1, dtype=np.int64)
    return integrate(lambda _p, x: func(x), p, edges[:-1], edges[1:],
                     rtol=rtol, atol=atol)


def fixed_panel(func, a, b):
    """Single-panel Kronrod-15 integral of ``func`` over [a_i, b_i] (arrays).

    Used for short polynomial pieces where 1/sigma^(m-1) is analytic on a
    disc many widths wide, so one panel is accurate to rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    half = 0.5 * (b - a)
    x = (a + half)[..., None] + half[..., None] * NODES
    return (func(x) @ WK) * half
