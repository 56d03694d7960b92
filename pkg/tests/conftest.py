import numpy as np
import pytest
import sympy as sp

from bsymp.charts import BChart
from bsymp import expr as ex


@pytest.fixture
def torus2():
    # hypersurface at x1 = 0; the sin-model has a companion zero at x1 = 1/2
    return BChart(2, ((-0.25, 0.75), (0.0, 1.0)), (True, True), has_Z=True)


@pytest.fixture
def torus4():
    return BChart(4, ((-0.25, 0.75),) + ((0.0, 1.0),) * 3, (True,) * 4, has_Z=True)


@pytest.fixture
def plain4():
    return BChart(4, ((-1.0, 1.0),) * 4, (False,) * 4, has_Z=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_poly_trig(rng, dim, n_terms=2, amplitude=1):
    """Small random smooth coefficient in the polynomial/trig fragment."""
    terms = []
    for _ in range(n_terms):
        kind = rng.integers(0, 4)
        i = int(rng.integers(1, dim + 1))
        j = int(rng.integers(1, dim + 1))
        c = sp.Rational(int(rng.integers(-3, 4)), int(rng.integers(1, 4)))
        if c == 0:
            c = sp.Rational(1, 2)
        x = ex.coord(i)
        y = ex.coord(j)
        if kind == 0:
            terms.append(c * x)
        elif kind == 1:
            terms.append(c * x * y)
        elif kind == 2:
            terms.append(c * sp.sin(2 * sp.pi * x))
        else:
            terms.append(c * sp.cos(2 * sp.pi * x) * y)
    return amplitude * sum(terms)
