import numpy as np
import pytest

from tpreg.tcore import tprod, ttranspose


def rand_tensor(rng, *shape):
    return rng.standard_normal(shape)


def gram(rng, rows, m, n):
    """Symmetric positive semidefinite ``C^T * C``."""
    c = rng.standard_normal((rows, m, n))
    return tprod(ttranspose(c), c)


def rel(a, b):
    return np.linalg.norm(np.ravel(a - b)) / max(np.linalg.norm(np.ravel(b)), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
