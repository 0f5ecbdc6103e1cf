import numpy as np
import pytest

from weakstats.hilbert import pure_state, spectral_decompose, validate_density


def random_pure(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return pure_state(v)


def random_density(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = m @ m.conj().T
    return validate_density(m / np.trace(m).real)


def random_observable(rng, dim):
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return spectral_decompose(h + h.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
