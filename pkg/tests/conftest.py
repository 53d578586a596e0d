import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dense_kron(xs):
    out = np.ones(1)
    for x in xs:
        out = np.kron(out, x)
    return out
