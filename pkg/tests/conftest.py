import numpy as np
import pytest

from deltasol.nonlinearity import Grid, Nonlinearity
from deltasol.solitary import SolitonParams
from deltasol.spectral import Linearization


@pytest.fixture(scope="session")
def nl():
    return Nonlinearity([0.2, 0.8])


@pytest.fixture(scope="session")
def soliton(nl):
    return SolitonParams.from_amplitude(nl, 1.0)


@pytest.fixture(scope="session")
def lin(nl, soliton):
    return Linearization.from_soliton(nl, soliton)


@pytest.fixture(scope="session")
def wide_grid():
    return Grid.from_extent(0.05, 100.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)


def make_point(a_val, nu, C, a2=0.0):
    """Quadratic nonlinearity with prescribed a(C^2)=a_val, a'(C^2)=nu*a_val/C^2, a''=a2."""
    s0 = C * C
    ap = nu * a_val / s0
    # a(s) = a_val + ap (s - s0) + (a2/2)(s - s0)^2 expanded in powers of s
    c0 = a_val - ap * s0 + 0.5 * a2 * s0 * s0
    c1 = ap - a2 * s0
    c2 = 0.5 * a2
    nl_r = Nonlinearity([c0, c1, c2])
    p = SolitonParams.from_amplitude(nl_r, C)
    return nl_r, p, Linearization.from_soliton(nl_r, p)


def random_in_window(rng, n, margin=0.02, with_a2=True):
    """Random (nl, params, lin) with the internal mode strictly inside the window."""
    lo, hi = 1.0 / np.sqrt(2.0), np.sqrt(2.0) * (1.0 + np.sqrt(3.0)) / 4.0
    out = []
    for _ in range(n):
        a_val = rng.uniform(0.3, 2.5)
        C = rng.uniform(0.4, 2.0)
        nu = rng.uniform(lo + margin, hi - margin)
        a2 = rng.uniform(-0.5, 0.5) if with_a2 else 0.0
        out.append(make_point(a_val, nu, C, a2))
    return out
