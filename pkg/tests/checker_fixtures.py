"""Hand-built instances for the irreducibility and interdependence checkers.

Each fixture returns ``(model, expected_ok, expected_witness)``.
"""
import numpy as np

from uncoupled.model import Deterministic, IidPerAction, NetworkModel


def ring3():
    """Three states on a ring; only joint association 1 advances the ring."""
    rates = np.full((3, 2, 1), 0.5)
    g = np.array([[0, 1], [1, 2], [2, 0]])
    return NetworkModel(2, [(0, 1)], rates, Deterministic(g)), True, None


def frozen2():
    """g(s, a) = s on two states: state 1 is unreachable from state 0."""
    rates = np.full((2, 2, 1), 0.5)
    g = np.array([[0, 0], [1, 1]])
    return NetworkModel(2, [(0, 1)], rates, Deterministic(g)), False, (0, 1)


def shared_pair():
    """Two users on two APs, equal airtime sharing: every move is felt."""
    rates = np.empty((1, 4, 2))
    for k, (a0, a1) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        rates[0, k] = (0.4, 0.4) if a0 == a1 else (0.8, 0.8)
        rates[0, k] += (0.1 * a0, 0.05 * a1)
    return NetworkModel(2, [(0, 1), (0, 1)], rates, Deterministic(np.zeros((1, 4), dtype=int))), True, None


def decoupled_pair():
    """Each user's rate depends on its own AP only."""
    rates = np.empty((1, 4, 2))
    for k, (a0, a1) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        rates[0, k] = (0.3 + 0.4 * a0, 0.2 + 0.5 * a1)
    model = NetworkModel(2, [(0, 1), (0, 1)], rates, Deterministic(np.zeros((1, 4), dtype=int)))
    # subset {user 0} first (mask 1); user 1 at its first AP cannot see it
    return model, False, {"state": 0, "subset": (0,), "action": (0, 0)}


def _iid_pair(sign):
    """Two states, uniform pmf. Each user's rate moves with the other's AP by
    +-0.1; with ``sign=-1`` the effect flips between states and cancels in
    expectation."""
    rates = np.empty((2, 4, 2))
    for s in range(2):
        flip = 1.0 if (s == 0 or sign > 0) else -1.0
        for k, (a0, a1) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            rates[s, k] = (0.5 + flip * 0.1 * a1, 0.5 + flip * 0.1 * a0)
    return NetworkModel(2, [(0, 1), (0, 1)], rates, IidPerAction(np.full((4, 2), 0.5)))


def expected_coupled():
    return _iid_pair(+1), True, None


def expected_cancelled():
    """Coupled in every state, decoupled in expectation."""
    return _iid_pair(-1), False, {"state": None, "subset": (0,), "action": (0, 0)}


IRREDUCIBILITY = [ring3, frozen2]
INTERDEPENDENCE = [shared_pair, decoupled_pair]
EXPECTED_INTERDEPENDENCE = [expected_coupled, expected_cancelled]
