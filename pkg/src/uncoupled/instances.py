"""Small generated instances for analysis and tests."""
from __future__ import annotations

import numpy as np

from .model import (ControlledMarkov, Deterministic, ExogenousErgodic, IidPerAction, NetworkModel,
                    check_interdependence, check_irreducibility)
from .utility import NormalizedLog, PiecewiseLinear, UtilityProfile


def _rates(rng, S, nA, N, levels):
    # rates on a fine grid so ties are impossible in practice but values stay exact
    return rng.integers(1, levels, size=(S, nA, N)) / levels


def random_deterministic(seed: int, num_users: int = 2, num_aps: int = 2, num_states: int = 2,
                         levels: int = 1000, max_tries: int = 1000) -> NetworkModel:
    """Random interdependent instance with an irreducible state map.

    Every user may join every AP; rates are drawn from ``{1/levels, ...}``.
    """
    rng = np.random.default_rng([seed, 11])
    sets = [tuple(range(num_aps))] * num_users
    nA = num_aps ** num_users
    for _ in range(max_tries):
        rates = _rates(rng, num_states, nA, num_users, levels)
        g = rng.integers(0, num_states, size=(num_states, nA))
        m = NetworkModel(num_aps, sets, rates, Deterministic(g), name=f"random-{seed}")
        if check_irreducibility(m)[0] and check_interdependence(m)[0]:
            return m
    raise RuntimeError("no interdependent irreducible instance found")


STANDARD_RATES = [
    [[0.033, 0.033], [0.95, 0.9], [0.007, 0.018], [0.019, 0.007]],
    [[0.007, 0.04], [0.028, 0.013], [0.02, 0.039], [0.036, 0.035]],
]
STANDARD_NEXT = [[0, 0, 1, 1], [0, 1, 0, 1]]


def standard_instance() -> NetworkModel:
    """Two users, two APs, two states, one clearly best configuration.

    In state 0 the association (AP 0, AP 1) serves both users well and keeps
    the state; every other configuration yields small, distinct rates. The
    unperturbed chain then has a unique best cycle and, at ``z = 3``, the
    stationary law concentrates on it already at ``eps = 0.05``.
    """
    return NetworkModel(2, [(0, 1), (0, 1)], np.array(STANDARD_RATES), Deterministic(np.array(STANDARD_NEXT)),
                        name="standard-2x2x2")


def bernoulli_iid(p: float = 0.5, num_users: int = 2) -> NetworkModel:
    """Two states with rates 0 and 1, drawn i.i.d. regardless of the associations."""
    sets = [(0, 1)] * num_users
    nA = 2 ** num_users
    rates = np.zeros((2, nA, num_users))
    rates[1] = 1.0
    pmf = np.tile([1.0 - p, p], (nA, 1))
    return NetworkModel(2, sets, rates, IidPerAction(pmf), name="bernoulli-iid")


def bernoulli_markov(hold: float = 0.4, num_users: int = 2) -> NetworkModel:
    """Two-state chain holding with probability ``hold``; rate 1 in state 1."""
    sets = [(0, 1)] * num_users
    nA = 2 ** num_users
    rates = np.zeros((2, nA, num_users))
    rates[1] = 1.0
    T = np.array([[hold, 1.0 - hold], [1.0 - hold, hold]])
    kernel = np.repeat(T[:, None, :], nA, axis=1)
    return NetworkModel(2, sets, rates, ControlledMarkov(kernel), name="bernoulli-markov")


def two_state_exogenous(seed: int = 0, stay=(0.7, 0.4), num_users: int = 2, num_aps: int = 2,
                        levels: int = 1000) -> NetworkModel:
    """Random interdependent rates on a two-state exogenous chain."""
    rng = np.random.default_rng([seed, 13])
    sets = [tuple(range(num_aps))] * num_users
    nA = num_aps ** num_users
    T = np.array([[stay[0], 1 - stay[0]], [1 - stay[1], stay[1]]])
    while True:
        rates = _rates(rng, 2, nA, num_users, levels)
        m = NetworkModel(num_aps, sets, rates, ExogenousErgodic(T), name=f"exogenous-{seed}")
        if check_interdependence(m)[0]:
            return m


def default_utility(num_users: int) -> UtilityProfile:
    return UtilityProfile.uniform(NormalizedLog(), num_users)


def linear_utility(num_users: int, u_max: float = 0.9) -> UtilityProfile:
    return UtilityProfile.uniform(PiecewiseLinear.linear(u_max), num_users)
