import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uncoupled.errors import ContractError, DomainError
from uncoupled.frame import (FrameAgent, FrameParams, all_joint_controls, choose_frame_params_iid,
                             choose_frame_params_markov, control_slems, control_stationary, control_table,
                             expected_payoff_control, expected_payoff_iid, frame_averages, induced_kernel,
                             joint_control, markov_constant, run_frame)
from uncoupled.instances import bernoulli_iid, bernoulli_markov, default_utility, standard_instance
from uncoupled.markov import power_iteration
from uncoupled.model import ControlledMarkov, IidPerAction, NetworkModel
from uncoupled.utility import NormalizedLog


# parameter rules

def test_iid_rule_vacuous_at_large_eps():
    # [TRIVIAL] eps=0.3, z=3: L=4, delta=sqrt(6 ln(10/3) / 4) > 1 with a warning
    with pytest.warns(RuntimeWarning):
        L, d = choose_frame_params_iid(0.3, 3)
    assert L == 4 and d == pytest.approx(math.sqrt(6 * math.log(10 / 3) / 4)) and d == pytest.approx(1.344, abs=1e-3)


def test_iid_rule_small_eps():
    L, d = choose_frame_params_iid(0.001, 3)
    assert L == 1000 and d == pytest.approx(0.2036, abs=1e-4)


@given(st.floats(0.001, 0.999), st.floats(1.01, 20))
def test_iid_rule_inequality(eps, z):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        L, d = choose_frame_params_iid(eps, z)
        Lm, dm = choose_frame_params_markov(eps, z, 0.3)
    assert L * d * d >= 2 * z * math.log(1 / eps) * (1 - 1e-12)
    assert Lm * dm * dm >= markov_constant(z, 0.3) * math.log(1 / eps) * (1 - 1e-12)


def test_markov_constant():
    assert markov_constant(3, 0.0) == 3
    assert markov_constant(3, 0.5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        markov_constant(3, 1.0)
    with pytest.raises(DomainError):
        choose_frame_params_iid(1.0, 3)


def test_params_validation():
    with pytest.raises(DomainError):
        FrameParams(0.1, 3, 0, 10, 0.1)
    with pytest.raises(DomainError):
        FrameParams(0.1, 3, 1, 10, 0.0)


# expected payoffs and controls

def _two_state_iid(pmf_row):
    rates = np.array([[[0.2]], [[0.8]]])
    return NetworkModel(1, [(0,)], rates, IidPerAction(np.array([pmf_row])))


def test_expected_payoff_iid():
    assert expected_payoff_iid(_two_state_iid([0.0, 1.0]), (0,)).tolist() == [0.8]
    assert expected_payoff_iid(_two_state_iid([0.5, 0.5]), (0,)) == pytest.approx([0.5])
    with pytest.raises(ContractError):
        expected_payoff_iid(standard_instance(), (0, 0))


def test_expected_payoff_iid_monte_carlo():
    # [DERIVED] Monte-Carlo mean of pinned frames within 3 sigma
    m = bernoulli_iid(0.3)
    avgs = frame_averages(m, (0, 1), 50, 4000, seed=2)
    exact = expected_payoff_iid(m, (0, 1))
    sd = math.sqrt(0.3 * 0.7 / (50 * 4000))
    assert np.all(np.abs(avgs.mean(axis=0) - exact) <= 3 * sd)


def test_control_table_encoding(standard):
    m = bernoulli_markov()
    tab = control_table(m)
    assert tab.shape == (2, 4, 2)
    # control c reads as base-2 digits, state 0 least significant
    assert tab[0, 2].tolist() == [0, 1]
    assert joint_control(m, (2, 3)).tolist() == [0 * 2 + 1, 1 * 2 + 1]


def test_control_stationary_and_payoff():
    m = bernoulli_markov(0.4)
    # doubly stochastic induced kernel: uniform law, payoff 0.5
    assert control_stationary(m, (0, 0)) == pytest.approx([0.5, 0.5], abs=1e-14)
    assert expected_payoff_control(m, (1, 2)) == pytest.approx([0.5, 0.5], abs=1e-14)
    with pytest.raises(ContractError):
        induced_kernel(standard_instance(), (0, 0))


def test_control_stationary_power_iteration():
    # [DERIVED] second solver as oracle on an action-dependent kernel
    rng = np.random.default_rng(4)
    K = rng.random((3, 4, 3)) + 0.05
    K /= K.sum(axis=2, keepdims=True)
    m = NetworkModel(2, [(0, 1), (0, 1)], rng.random((3, 4, 2)), ControlledMarkov(K))
    for h in all_joint_controls(m)[::37]:
        assert np.allclose(control_stationary(m, h), power_iteration(induced_kernel(m, h)), atol=1e-8)


def test_expected_payoff_control_single_state():
    rates = np.array([[[0.3], [0.9]]])
    m = NetworkModel(2, [(0, 1)], rates, ControlledMarkov(np.ones((1, 2, 1))))
    assert expected_payoff_control(m, (1,)).tolist() == [0.9]


def test_expected_payoff_control_monte_carlo():
    # [DERIVED] long-run average under a pinned control, within 3 sigma of a
    # batch-means estimate
    rng = np.random.default_rng(8)
    K = rng.random((2, 4, 2)) + 0.1
    K /= K.sum(axis=2, keepdims=True)
    m = NetworkModel(2, [(0, 1), (0, 1)], rng.random((2, 4, 2)), ControlledMarkov(K))
    h = (1, 2)
    avgs = frame_averages(m, h, 200, 3000, variant="markov", seed=5)
    sd = avgs.std(axis=0, ddof=1) / math.sqrt(len(avgs))
    assert np.all(np.abs(avgs.mean(axis=0) - expected_payoff_control(m, h)) <= 3 * sd + 1e-12)


def test_control_slems_closed_form():
    # [DERIVED] 2-state hold-p chain has SLEM |2p - 1|, for every control
    assert np.allclose(control_slems(bernoulli_markov(0.4)), 0.2)


# agent and runs

def test_agent_content_absorbing_on_exact_frames():
    # [TRIVIAL] zero-variance frames and eps = 0: repeats always pass the delta test
    ag = FrameAgent(2, FrameParams(0.0, 3, 2, 10, 0.05), NormalizedLog(), np.random.default_rng(0))
    ag.q, ag.choices[:], ag.avgs[:] = 1, [0, 1], [0.4, 0.7]
    for _ in range(50):
        c = ag.choose()
        ag.observe(c, 0.4 if c == 0 else 0.7)
        assert ag.q == 1
    assert ag.choices.tolist() == [0, 1]


def test_agent_delta_test_breaks_contentment():
    ag = FrameAgent(2, FrameParams(0.0, 3, 1, 10, 0.05), NormalizedLog(), np.random.default_rng(0))
    ag.q, ag.choices[:], ag.avgs[:] = 1, [1], [0.5]
    c = ag.choose()
    ag.observe(c, 0.56)
    assert ag.q == 0


def test_variant_mismatch(util2):
    p = FrameParams(0.1, 3, 2, 10, 0.1)
    with pytest.raises(ContractError):
        run_frame(bernoulli_iid(), util2, p, 10, variant="markov")
    with pytest.raises(ContractError):
        run_frame(bernoulli_markov(), util2, p, 10, variant="iid")
    with pytest.raises(DomainError):
        run_frame(bernoulli_iid(), util2, p, 10, variant="other")


@pytest.mark.parametrize("variant,model", [("iid", bernoulli_iid(0.4)), ("markov", bernoulli_markov(0.3))])
def test_engines_agree_and_reproducible(variant, model, util2):
    p = FrameParams(0.3, 3, 2, 25, 0.2, seed=6)
    a = run_frame(model, util2, p, 400, variant=variant, trace=True, record_every=20, engine="python")
    b = run_frame(model, util2, p, 400, variant=variant, trace=True, record_every=20)
    c = run_frame(model, util2, p, 400, variant=variant, trace=True, record_every=20, chunk=7)
    for key in a.trace:
        assert np.array_equal(a.trace[key], b.trace[key])
        assert np.array_equal(b.trace[key], c.trace[key])
    assert np.allclose(a.sum_utility, b.sum_utility, atol=1e-12)
    assert b.slots[-1] == 400 * 25


def test_frame_average_hoeffding():
    # [DERIVED] P(|rbar - E r| >= delta) <= 2 exp(-L delta^2 / 2), Monte-Carlo
    L, d, F = 100, 0.2, 20_000
    avgs = frame_averages(bernoulli_iid(0.5), (0, 0), L, F, seed=3)[:, 0]
    bound = 2 * math.exp(-L * d * d / 2)
    frac = np.mean(np.abs(avgs - 0.5) >= d)
    assert frac <= bound + 3 * math.sqrt(bound * (1 - bound) / F)


def test_single_state_markov_matches_iid(util2):
    # one state: the control variant and the i.i.d. variant produce the same trace
    rates = np.array([[[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8]]])
    iid = NetworkModel(2, [(0, 1), (0, 1)], rates, IidPerAction(np.ones((4, 1))))
    mk = NetworkModel(2, [(0, 1), (0, 1)], rates, ControlledMarkov(np.ones((1, 4, 1))))
    p = FrameParams(0.3, 3, 2, 5, 0.01, seed=1)
    a = run_frame(iid, util2, p, 500, trace=True)
    b = run_frame(mk, util2, p, 500, variant="markov", trace=True)
    for key in a.trace:
        assert np.array_equal(a.trace[key], b.trace[key])
