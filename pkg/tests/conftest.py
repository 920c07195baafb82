import numpy as np
import pytest

from daplace.checks import small_model
from daplace.experiments.training import build_training_set
from daplace.pde.nonlinearity import Nonlinearity


class ZeroReaction(Nonlinearity):
    '''g = 0, turns the model into the plain heat equation'''

    def value(self, y):
        return np.zeros_like(y)

    def derivative(self, y):
        return np.zeros_like(y)

    def second_derivative(self, y):
        return np.zeros_like(y)


@pytest.fixture(scope='session')
def model6():
    return small_model(6, 4)


@pytest.fixture(scope='session')
def model10():
    return small_model(10, 12)


@pytest.fixture(scope='session')
def training6(model6):
    return build_training_set('single', 1, 0, model6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

