import numpy as np
import pytest

from uncoupled.errors import DomainError
from uncoupled.markov import is_aperiodic, power_iteration, slem, stationary_distribution


def test_doubly_stochastic_is_uniform():
    P = np.array([[0.3, 0.7], [0.7, 0.3]])
    assert np.allclose(stationary_distribution(P), [0.5, 0.5], atol=1e-14)


def test_reducible_chain_rejected():
    with pytest.raises(DomainError):
        stationary_distribution(np.eye(2))


def test_periodic_chain_rejected():
    assert not is_aperiodic(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(DomainError):
        stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_direct_solve_agrees_with_power_iteration():
    # [DERIVED] second solver as oracle
    rng = np.random.default_rng(3)
    for _ in range(5):
        P = rng.random((6, 6))
        P /= P.sum(axis=1, keepdims=True)
        pi = stationary_distribution(P)
        assert np.abs(pi @ P - pi).max() <= 1e-10
        assert np.allclose(pi, power_iteration(P), atol=1e-8)


def test_slem_examples():
    assert slem(np.eye(3)) == pytest.approx(1.0)
    assert slem(np.tile([0.2, 0.3, 0.5], (3, 1))) == pytest.approx(0.0, abs=1e-12)
    for p in (0.1, 0.4, 0.9):
        # [DERIVED] eigenvalues of [[p, 1-p], [1-p, p]] are 1 and 2p - 1
        P = np.array([[p, 1 - p], [1 - p, p]])
        assert slem(P) == pytest.approx(abs(2 * p - 1), abs=1e-12)
