import numpy as np
import pytest

from farkit.grid import Curve, QuadratureGrid
from farkit.moments import WeightedMomentPair


def unit_weight_grid(m: int) -> QuadratureGrid:
    """Synthetic grid whose weight matrix is the identity (not a trapezoid grid)."""
    return QuadratureGrid(np.linspace(0.0, 1.0, m), np.ones(m))


def moment_pair(c0_tilde, c1_tilde, grid) -> WeightedMomentPair:
    """Wrap explicit weighted matrices with a zero mean curve."""
    zero = Curve(np.zeros(grid.size), grid)
    return WeightedMomentPair(
        np.asarray(c0_tilde, float), np.asarray(c1_tilde, float), zero, grid
    )


def random_spd(rng, m: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((m, m))
    return scale * (a @ a.T) / m


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
