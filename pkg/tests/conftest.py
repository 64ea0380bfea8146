import numpy as np
import pytest

from samfit import PriorConfig, validate_design


def direct_dft(values):
    """O(n^2) summation with the analysis kernel exp(+2 pi i k t / n) / n."""
    v = np.asarray(values, dtype=float)
    n = v.size
    t = np.arange(n)
    return np.array([np.sum(v * np.exp(2j * np.pi * k * t / n)) / n for k in range((n - 1) // 2 + 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def default_prior():
    return PriorConfig(gamma=5.0, q=0.5, q_axis=0.5)


@pytest.fixture
def scenario_design():
    return validate_design([101] * 50)
