"""Numerical laboratory for rotationally symmetric model manifolds."""

__version__ = "0.1.0"

from ._kernels import USE_NUMBA  # noqa: E402
from .geometry import (  # noqa: E402
    GreenFunction,
    ModelManifold,
    ball_volume,
    check_green_harmonic,
    curvature_at,
    green,
    is_parabolic,
    ricci_extremes,
)
from .warpfn import (  # noqa: E402
    SawtoothSpec,
    WarpingFunction,
    build_sawtooth_warp,
    check_structural,
    make_analytic_warp,
)

__all__ = [
    "__version__",
    "USE_NUMBA",
    "GreenFunction",
    "ModelManifold",
    "SawtoothSpec",
    "WarpingFunction",
    "ball_volume",
    "build_sawtooth_warp",
    "check_green_harmonic",
    "check_structural",
    "curvature_at",
    "green",
    "is_parabolic",
    "make_analytic_warp",
    "ricci_extremes",
]
