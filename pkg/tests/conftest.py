import numpy as np
import pytest

from gaborkit import bodies


@pytest.fixture
def disk():
    return bodies.ball(1.0, 2)


@pytest.fixture
def half_disk():
    return bodies.ball(0.5, 2)


@pytest.fixture
def ellipse21():
    return bodies.ellipsoid([2.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
