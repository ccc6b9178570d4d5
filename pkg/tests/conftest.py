import numpy as np
import pytest

from ufoctl.gmon import GmonModel


@pytest.fixture
def model():
    return GmonModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2
