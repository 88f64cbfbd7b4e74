import numpy as np
import pytest

from czlab.geometry import ModelManifold
from czlab.warpfn import SawtoothSpec, build_sawtooth_warp, make_analytic_warp


@pytest.fixture(scope="session")
def saw():
    return build_sawtooth_warp(SawtoothSpec.default())


@pytest.fixture(scope="session")
def S2(saw):
    return ModelManifold(2, saw)


@pytest.fixture(scope="session")
def E2():
    return ModelManifold(2, make_analytic_warp("euclidean"))


@pytest.fixture(scope="session")
def E3():
    return ModelManifold(3, make_analytic_warp("euclidean"))


@pytest.fixture(scope="session")
def H2():
    return ModelManifold(2, make_analytic_warp("hyperbolic", 1.0))


@pytest.fixture(scope="session")
def H3():
    return ModelManifold(3, make_analytic_warp("hyperbolic", 1.0))


def tooth_grid(warp, k, n=101):
    """Global radii across the k-th tooth block."""
    w = warp.meta["windows"][k - 1]
    return np.linspace(w["start"], w["end"], n)
