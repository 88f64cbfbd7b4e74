"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and ``CZLAB_NUMBA`` is not
set to ``0``.  Both paths expose the same functions with the same signatures;
tests exercise them side by side.
"""
from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "horner3",
    "horner3_numpy",
    "locate",
    "gk_reduce",
    "gk_reduce_numpy",
]


# ---------------------------------------------------------------- numpy path

def horner3_numpy(coeffs, idx, tau):
    """Value, first and second derivative of per-piece polynomials.

    ``coeffs[p]`` holds ascending coefficients in the local coordinate of
    piece ``p``; ``idx`` selects the piece for each entry of ``tau``.
    """
    c = coeffs[idx]
    deg = c.shape[1] - 1
    v = np.zeros(tau.shape)
    d1 = np.zeros(tau.shape)
    d2 = np.zeros(tau.shape)
    for j in range(deg, -1, -1):
        d2 = d2 * tau + 2.0 * d1
        d1 = d1 * tau + v
        v = v * tau + c[:, j]
    return v, d1, d2


def gk_reduce_numpy(fvals, half, wk, wg):
    """Kronrod and embedded Gauss sums for a batch of panels.

    ``fvals`` is (npanels, 15) in Kronrod node order; Gauss nodes are the odd
    positions.
    """
    k = (fvals @ wk) * half
    g = (fvals[:, 1::2] @ wg) * half
    return k, g


# ---------------------------------------------------------------- numba path

USE_NUMBA = False
if os.environ.get("CZLAB_NUMBA", "1") != "0":
    try:
        import numba as nb

        USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if USE_NUMBA:

    @nb.njit(cache=True)
    def _horner3_nb(coeffs, idx, tau):
        n = tau.shape[0]
        deg = coeffs.shape[1] - 1
        v = np.empty(n)
        d1 = np.empty(n)
        d2 = np.empty(n)
        for i in range(n):
            p = idx[i]
            x = tau[i]
            a = 0.0
            b = 0.0
            c = 0.0
            for j in range(deg, -1, -1):
                c = c * x + 2.0 * b
                b = b * x + a
                a = a * x + coeffs[p, j]
            v[i] = a
            d1[i] = b
            d2[i] = c
        return v, d1, d2

    @nb.njit(cache=True)
    def _gk_reduce_nb(fvals, half, wk, wg):
        n = fvals.shape[0]
        k = np.empty(n)
        g = np.empty(n)
        for i in range(n):
            sk = 0.0
            for j in range(15):
                sk += wk[j] * fvals[i, j]
            sg = 0.0
            for j in range(7):
                sg += wg[j] * fvals[i, 2 * j + 1]
            k[i] = sk * half[i]
            g[i] = sg * half[i]
        return k, g

    def horner3(coeffs, idx, tau):
        tau = np.ascontiguousarray(tau, dtype=np.float64)
        shape = tau.shape
        v, d1, d2 = _horner3_nb(
            np.ascontiguousarray(coeffs, dtype=np.float64),
            np.ascontiguousarray(idx, dtype=np.int64).ravel(),
            tau.ravel(),
        )
        return v.reshape(shape), d1.reshape(shape), d2.reshape(shape)

    def gk_reduce(fvals, half, wk, wg):
        return _gk_reduce_nb(
            np.ascontiguousarray(fvals, dtype=np.float64),
            np.ascontiguousarray(half, dtype=np.float64),
            wk,
            wg,
        )

else:
    horner3 = horner3_numpy
    gk_reduce = gk_reduce_numpy


def locate(lefts, t):
    """Index of the piece containing each ``t`` (pieces start at ``lefts``)."""
    idx = np.searchsorted(lefts, t, side="right") - 1
    return np.clip(idx, 0, len(lefts) - 1)
