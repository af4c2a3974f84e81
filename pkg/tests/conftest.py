import numpy as np
import pytest

from confkob import einstein_de_sitter, minkowski, minkowski_halfspace


@pytest.fixture(scope="session")
def eds():
    return einstein_de_sitter()


@pytest.fixture(scope="session")
def mink():
    return minkowski()


@pytest.fixture(scope="session")
def halfspace():
    return minkowski_halfspace()


def photon_position(sigma):
    """The reference null ray (0, 0, 3 sigma^(1/5), sigma^(3/5))."""
    sigma = np.asarray(sigma, dtype=float)
    zero = np.zeros_like(sigma)
    return np.stack([zero, zero, 3.0 * sigma ** 0.2, sigma ** 0.6], axis=-1)


def photon_projective(sigma):
    """Closed-form projective parameter of the reference ray, base sigma = 1."""
    w = np.asarray(sigma, dtype=float) ** 1.4
    return 5.0 * (w - 1.0) / (w + 6.0)
