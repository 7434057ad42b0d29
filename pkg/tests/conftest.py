import numpy as np
import pytest

from pwgf.ensemble import ParticleEnsemble, StackedField
from pwgf.objectives import Dataset, ICFL, LinearPotential, MatrixDecomposition, MeanQuartic


def rng_for(*key):
    return np.random.default_rng(np.random.SeedSequence(key))


def unit_field(n, d, rng):
    v = rng.standard_normal((n, d))
    v /= np.sqrt(np.mean(np.sum(v**2, axis=1)))
    return StackedField(v)


def random_ensemble(n, d, rng, scale=0.8):
    return ParticleEnsemble(scale * rng.standard_normal((n, d)))


@pytest.fixture
def rng():
    return rng_for(0)


@pytest.fixture(scope="session")
def neural_setup():
    """Shared small (target, dataset) pair for matdecomp / icfl tests."""
    r = rng_for(2024)
    target = ParticleEnsemble(r.standard_normal((10, 8)))
    dataset = Dataset(5, 200, seed=11)
    return target, dataset


@pytest.fixture(scope="session")
def matdecomp_obj(neural_setup):
    target, dataset = neural_setup
    return MatrixDecomposition(target, dataset, 3, 5)


@pytest.fixture(scope="session")
def icfl_obj(neural_setup):
    target, dataset = neural_setup
    return ICFL(target, dataset, 3, 5)
