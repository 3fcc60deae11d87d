import numpy as np
import pytest

import ms_stability as ms


def drift_domain(a=1.0, b=1.0):
    """Strip with the canonical separated drift data: x+1 above, -x below."""
    return ms.StripDomain(
        half_height=a,
        period=b,
        top=ms.BoundaryData(1.0, lambda x: np.ones_like(x)),
        bottom=ms.BoundaryData(-1.0),
    )


def flat_setup(a=1.0, b=1.0, n=48, rtol=1e-10):
    """Solved flat-interface state plus its grid and curve."""
    domain = drift_domain(a, b)
    curve = ms.flat_curve(b, n)
    grid = ms.Grid(n, n)
    state, stats = ms.solve_state(domain, curve, grid, rtol=rtol)
    return domain, curve, grid, state, stats


@pytest.fixture
def unit_strip_state():
    return flat_setup(1.0, 1.0, 48)
