"""Synthetic WiFi-like scenario: channel allocation as the network state.

Rates are a stand-in for a PHY/MAC simulator. A user's solo rate at an AP is
a step function of distance; users on one AP share its airtime equally; APs
that share the common channel split airtime among themselves.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DomainError
from .model import ControlledMarkov, Deterministic, ExogenousErgodic, IidPerAction, NetworkModel

# (max distance in metres, normalized solo rate)
SOLO_RATE_STEPS = ((10.0, 1.0), (20.0, 0.75), (30.0, 0.5), (45.0, 0.25))
TRIANGLE_SIDE = 25.0
MARKOV_NOISE = 0.5


def solo_rate(distance: float) -> float:
    for limit, r in SOLO_RATE_STEPS:
        if distance <= limit:
            return r
    return 0.0


def paper_layout():
    """Three APs on an equilateral triangle of side 25 m and five users."""
    h = TRIANGLE_SIDE * math.sqrt(3) / 2
    aps = [(0.0, 0.0), (TRIANGLE_SIDE, 0.0), (TRIANGLE_SIDE / 2, h)]
    users = [(3.0, 2.0), (6.0, -4.0), (21.0, 3.0), (12.5, 18.0), (12.5, 7.0)]
    return users, aps


def channel_states(num_aps: int, num_channels: int):
    """Each state lists the APs holding an exclusive channel.

    ``num_channels - 1`` channels are exclusive and the last one is shared by
    the remaining APs, so two channels and three APs give three states.
    """
    if num_channels < 1:
        raise DomainError("need at least one channel")
    k = min(num_channels - 1, num_aps)
    return [frozenset(c) for c in itertools.combinations(range(num_aps), k)]


def _airtime(ap: int, exclusive: frozenset, num_aps: int) -> float:
    if ap in exclusive:
        return 1.0
    return 1.0 / (num_aps - len(exclusive))


def make_wifi_scenario(num_users: int, positions, ap_positions, num_channels: int = 2,
                       evolution: str = "deterministic") -> NetworkModel:
    """Build the channel-allocation network.

    ``evolution`` is ``"deterministic"`` (next state gives the exclusive
    channels to the most loaded APs, ties to the lowest index),
    ``"iid"`` (uniform, action independent, unknown to users) or
    ``"exogenous"`` (uniform i.i.d. written as an ergodic chain, known to users)
    or ``"markov"`` (the deterministic rule followed with probability
    ``1 - MARKOV_NOISE``, otherwise a uniform state).
    """
    if num_users < 1 or len(ap_positions) < 1:
        raise DomainError("need at least one user and one AP")
    if len(positions) != num_users:
        raise DomainError(f"{len(positions)} user positions for {num_users} users")
    M = len(ap_positions)
    solo = np.array([[solo_rate(math.dist(u, p)) for p in ap_positions] for u in positions])
    assoc = [tuple(int(m) for m in np.flatnonzero(row > 0)) for row in solo]
    for i, A in enumerate(assoc):
        if not A:
            raise DomainError(f"user {i} is out of range of every AP")
    states = channel_states(M, num_channels)
    S = len(states)
    sizes = [len(A) for A in assoc]
    joint = list(itertools.product(*[range(n) for n in sizes]))
    rates = np.zeros((S, len(joint), num_users))
    next_state = np.zeros((S, len(joint)), dtype=np.int64)
    index = {st: k for k, st in enumerate(states)}
    k_excl = len(states[0])
    for k, pos in enumerate(joint):
        a = [assoc[i][p] for i, p in enumerate(pos)]
        load = np.bincount(a, minlength=M)
        for s, excl in enumerate(states):
            for i, ap in enumerate(a):
                rates[s, k, i] = solo[i, ap] / load[ap] * _airtime(ap, excl, M)
        # stable sort: ties resolved towards the lowest AP index
        busiest = frozenset(int(m) for m in np.argsort(-load, kind="stable")[:k_excl])
        next_state[:, k] = index[busiest]
    if evolution == "deterministic":
        ev = Deterministic(next_state)
    elif evolution == "iid":
        ev = IidPerAction(np.full((len(joint), S), 1.0 / S))
    elif evolution == "exogenous":
        ev = ExogenousErgodic(np.full((S, S), 1.0 / S))
    elif evolution == "markov":
        kernel = np.full((S, len(joint), S), MARKOV_NOISE / S)
        kernel[np.arange(S)[:, None], np.arange(len(joint))[None, :], next_state] += 1.0 - MARKOV_NOISE
        ev = ControlledMarkov(kernel)
    else:
        raise DomainError(f"unknown evolution {evolution!r}")
    return NetworkModel(M, assoc, rates, ev, name=f"wifi-{M}ap-{num_users}u-{evolution}")


def paper_scenario(evolution: str = "deterministic") -> NetworkModel:
    users, aps = paper_layout()
    return make_wifi_scenario(len(users), users, aps, num_channels=2, evolution=evolution)
