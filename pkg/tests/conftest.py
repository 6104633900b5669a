import numpy as np
import pytest

from grhmc.core import PhasePoint, Standardizer


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def phase(q, p, region=(), t=0.0):
    return PhasePoint(t, np.array(q, dtype=float), np.array(p, dtype=float),
                      np.array(region, dtype=bool))


def ident(d):
    return Standardizer.identity(d)
