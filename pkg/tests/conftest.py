import numpy as np
import pytest

from uncoupled.instances import default_utility, random_deterministic, standard_instance
from uncoupled.model import Deterministic, NetworkModel
from uncoupled.utility import NormalizedLog, UtilityProfile


def binomial_ok(k, n, p, sigmas=3.0):
    """|k - n p| within ``sigmas`` binomial standard deviations."""
    sd = np.sqrt(n * p * (1 - p))
    return abs(k - n * p) <= sigmas * sd


@pytest.fixture(scope="session")
def standard():
    return standard_instance()


@pytest.fixture(scope="session")
def util2():
    return default_utility(2)


@pytest.fixture(scope="session")
def random_model():
    return random_deterministic(0)


def single_state_model(num_actions=2):
    """One user, one state, ``num_actions`` APs with distinct rates."""
    rates = np.linspace(0.2, 0.8, num_actions).reshape(1, num_actions, 1)
    return NetworkModel(num_actions, [tuple(range(num_actions))], rates,
                        Deterministic(np.zeros((1, num_actions), dtype=np.int64)))
