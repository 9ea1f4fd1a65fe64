import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uncoupled.cycles import (ConfigurationCycle, best_single_cycle, cycle_rate, cycle_rates,
                              enumerate_basic_cycles, enumerate_short_cycles, frank_wolfe, grid_maximize,
                              hull_membership, pareto_front, schedule_rate, solve_action_grid_program,
                              solve_control_grid_program, solve_cycle_program, solve_state_grid_program,
                              state_path, time_sharing_schedule)
from uncoupled.errors import CapabilityError, ContractError
from uncoupled.instances import default_utility, linear_utility, random_deterministic, two_state_exogenous
from uncoupled.model import ControlledMarkov, Deterministic, IidPerAction, NetworkModel, average_rate


def det_model(rates, g, M=2, N=1):
    rates = np.asarray(rates, dtype=float)
    return NetworkModel(M, [tuple(range(M))] * N, rates, Deterministic(np.asarray(g)))


def brute_cycles(model):
    """Every consistent sequence of distinct configurations, modulo rotation."""
    nodes = [(s, k) for s in range(model.num_states) for k in range(model.num_joint)]
    g = model.evolution.next_state
    out = set()
    for n in range(1, len(nodes) + 1):
        for seq in itertools.permutations(nodes, n):
            if all(g[seq[j]] == seq[(j + 1) % n][0] for j in range(n)):
                out.add(ConfigurationCycle(seq))
    return out


# enumeration

def test_single_state_two_actions():
    # [DERIVED] two self-loops plus one 2-cycle
    m = det_model(np.array([[[0.2], [0.8]]]), [[0, 0]])
    cyc = enumerate_basic_cycles(m)
    assert len(cyc) == 3 and set(cyc) == brute_cycles(m)


def test_frozen_dynamics_never_mix_states():
    m = det_model(np.full((2, 2, 1), 0.5), [[0, 0], [1, 1]])
    for c in enumerate_basic_cycles(m):
        assert len({s for s, _ in c.configs}) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3), st.integers(1, 2))
def test_enumeration_matches_brute_force(seed, S, M):
    rng = np.random.default_rng(seed)
    if S * M > 6:
        return
    m = det_model(rng.random((S, M, 1)), rng.integers(0, S, (S, M)), M=M)
    cyc = enumerate_basic_cycles(m)
    assert len(cyc) == len(set(cyc))
    assert set(cyc) == brute_cycles(m)
    for c in cyc:
        assert c.is_basic and c.is_consistent(m) and len(c) <= S * M


def test_short_cycles_contain_basic_ones(random_model):
    basic = {c for c in enumerate_basic_cycles(random_model) if len(c) <= 3}
    short = enumerate_short_cycles(random_model, 3)
    assert {c for c in short if c.is_basic} == basic
    assert all(c.is_consistent(random_model) for c in short)


def test_rotation_canonical():
    assert ConfigurationCycle(((1, 0), (0, 3))).configs == ((0, 3), (1, 0))


def test_guard_and_contract():
    with pytest.raises(CapabilityError):
        enumerate_basic_cycles(random_deterministic(0), guard=4)
    with pytest.raises(ContractError):
        enumerate_basic_cycles(two_state_exogenous(0))


# rates

def test_cycle_rate_examples():
    m = det_model([[[0.2], [0.8]], [[0.8], [0.2]]], [[1, 1], [0, 0]])
    assert cycle_rate(m, ConfigurationCycle(((0, 1),))).tolist() == [0.8]
    assert cycle_rate(m, ConfigurationCycle(((0, 0), (1, 0)))) == pytest.approx([0.5])


def test_cycle_rate_equals_average_rate(random_model):
    # [DERIVED] cross-module: unrolled sequence through the model
    for c in enumerate_basic_cycles(random_model)[:200]:
        seq = [random_model.action(k) for _, k in c.configs] * 10
        assert np.allclose(average_rate(random_model, c.configs[0][0], seq), cycle_rate(random_model, c),
                           atol=1e-15)


def test_schedule_rate_enters_periodic_regime():
    m = det_model([[[0.0], [0.0]], [[1.0], [0.6]]], [[1, 1], [1, 1]])
    # from state 0 the first slot is transient, then state 1 forever
    assert schedule_rate(m, 0, [0, 1]) == pytest.approx([0.8])


# hull

def test_hull_single_and_midpoint(random_model):
    R = cycle_rates(random_model, enumerate_basic_cycles(random_model))
    ok, w = hull_membership(R[3], R)
    assert ok and w.sum() <= 1 + 1e-9
    assert np.all(w @ R >= R[3] - 1e-9)
    ok, _ = hull_membership(0.5 * (R[1] + R[7]), R)
    assert ok
    ok, w = hull_membership(R[0], R[:1])
    assert ok and w == pytest.approx([1.0])
    assert all(hull_membership(r, R)[0] for r in R)


def test_hull_non_member_verified_on_grid():
    # [DERIVED] exhaustive grid over weights at resolution 1/64 finds no dominating point
    R = np.array([[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]])
    x = R.max(axis=0) + 0.1
    assert not hull_membership(x, R)[0]
    for a in range(65):
        for b in range(65 - a):
            for c in range(65 - a - b):
                p = np.array([a, b, c]) / 64
                assert not np.all(p @ R >= x - 1e-9)


# grid programs

def test_single_cycle_program():
    m = det_model(np.array([[[0.3]]]), [[0]], M=1)
    sol = solve_cycle_program(m, default_utility(1), grid=4)
    assert list(sol.weights.values()) == [1.0]


def test_two_cycles_symmetric_split():
    # [DERIVED] 3-point grid: (1,0), (1/2,1/2), (0,1) with strictly concave symmetric U
    rates = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    m = NetworkModel(2, [(0, 1), (0,)], rates, Deterministic(np.zeros((1, 2), int)))
    cyc = [ConfigurationCycle(((0, 0),)), ConfigurationCycle(((0, 1),))]
    sol = solve_cycle_program(m, default_utility(2), grid=2, cycles=cyc)
    assert sol.weights == {cyc[0]: 0.5, cyc[1]: 0.5}


def test_cycle_optimum_beats_pure_cycles(random_model):
    util = default_utility(2)
    cyc = enumerate_basic_cycles(random_model, max_length=3)
    sol = solve_cycle_program(random_model, util, grid=3, cycles=cyc)
    best, _ = best_single_cycle(random_model, util, cyc)
    assert sol.value >= best - 1e-12


def test_grid_monotone_in_k(random_model):
    util = default_utility(2)
    cyc = enumerate_basic_cycles(random_model, max_length=2)
    vals = [solve_cycle_program(random_model, util, grid=K, cycles=cyc).value for K in (1, 2, 4)]
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12
    cont = solve_cycle_program(random_model, util, cycles=cyc)
    assert cont.value >= vals[2] - 1e-9 and cont.gap < 1e-6


def _brute_grid(R, util, K, slack=True):
    V = np.vstack([R, np.zeros(R.shape[1])]) if slack else R
    best = -np.inf
    for combo in itertools.combinations_with_replacement(range(len(V)), K):
        best = max(best, util.total(V[list(combo)].mean(axis=0)))
    return best


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_grid_maximize_matches_brute_force(seed, K):
    rng = np.random.default_rng(seed)
    R = rng.random((7, 2))
    util = default_utility(2)
    val, x, w = grid_maximize(R, util, K)
    assert val == pytest.approx(_brute_grid(R, util, K), abs=1e-12)
    assert np.allclose(sum(v * R[j] for j, v in w.items()), x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_pareto_front_matches_definition(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, (25, 3)).astype(float)
    idx = set(pareto_front(X).tolist())
    for j, x in enumerate(X):
        dominated = any(np.all(y >= x) and np.any(y > x) for y in X)
        if dominated:
            assert j not in idx
        else:
            # exactly one representative per distinct non-dominated vector
            assert any(np.array_equal(X[i], x) for i in idx)
    assert len({tuple(X[i]) for i in idx}) == len(idx)


def _brute_state_grid(model, util, K, mu):
    per_state = [list(itertools.combinations_with_replacement(range(model.num_joint), K))
                 for _ in range(model.num_states)]
    best = -np.inf
    for choice in itertools.product(*per_state):
        r = sum(mu[s] * model.rates[s, list(c)].mean(axis=0) for s, c in enumerate(choice))
        best = max(best, util.total(r))
    return best


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("K", [1, 2, 3])
def test_state_grid_matches_brute_force(seed, K):
    # [DERIVED] independent full enumeration over the product of per-state grids
    m = two_state_exogenous(seed)
    util = default_utility(2)
    sol = solve_state_grid_program(m, util, K)
    mu = m.evolution.stationary
    assert sol.value == pytest.approx(_brute_state_grid(m, util, K, mu), abs=1e-12)
    r = sum(mu[s] * w * m.rates[s, k] for (s, k), w in sol.weights.items())
    assert np.allclose(r, sol.rates)


def test_state_grid_non_concave_matches_brute_force():
    from uncoupled.utility import PiecewiseLinear, UtilityProfile
    util = UtilityProfile.uniform(PiecewiseLinear((0, 0.3, 1), (0, 0.1, 0.9)), 2)
    m = two_state_exogenous(4)
    sol = solve_state_grid_program(m, util, 2)
    assert sol.value == pytest.approx(_brute_state_grid(m, util, 2, m.evolution.stationary), abs=1e-12)


def test_state_grid_single_state_is_action_grid():
    rng = np.random.default_rng(5)
    rates = rng.random((1, 4, 2))
    util = default_utility(2)
    a = solve_state_grid_program(NetworkModel(2, [(0, 1)] * 2, rates, IidPerAction(np.ones((4, 1)))), util, 3)
    b = solve_action_grid_program(NetworkModel(2, [(0, 1)] * 2, rates, IidPerAction(np.ones((4, 1)))), util, 3)
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_state_grid_k1_best_pure_map():
    m = two_state_exogenous(3)
    util = default_utility(2)
    mu = m.evolution.stationary
    best = max(util.total(mu[0] * m.rates[0, a] + mu[1] * m.rates[1, b]) for a in range(4) for b in range(4))
    assert solve_state_grid_program(m, util, 1).value == pytest.approx(best, abs=1e-12)


def _markov_pair(seed, S=2):
    rng = np.random.default_rng(seed)
    K = rng.random((S, 4, S)) + 0.1
    K /= K.sum(axis=2, keepdims=True)
    return NetworkModel(2, [(0, 1)] * 2, rng.random((S, 4, 2)), ControlledMarkov(K))


def test_control_grid_single_state_is_state_grid():
    m = _markov_pair(1, S=1)
    util = default_utility(2)
    a = solve_control_grid_program(m, util, 2)
    b = solve_state_grid_program(m, util, 2, mu=[1.0])
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_control_grid_single_control():
    rates = np.array([[[0.4], ]])
    m = NetworkModel(1, [(0,)], rates, ControlledMarkov(np.ones((1, 1, 1))))
    sol = solve_control_grid_program(m, default_utility(1), 3)
    assert sol.weights == {(0,): pytest.approx(1.0)}


def test_control_grid_matches_brute_force():
    # [DERIVED] enumerate all grid mixtures of joint controls directly
    from uncoupled.frame import all_joint_controls, expected_payoff_control
    m = _markov_pair(2)
    util = default_utility(2)
    R = np.array([expected_payoff_control(m, h) for h in all_joint_controls(m)])
    assert solve_control_grid_program(m, util, 2).value == pytest.approx(_brute_grid(R, util, 2), abs=1e-12)


def test_frank_wolfe_two_point_closed_form():
    # maximize sum U over segment between (1,0) and (0,1): symmetric optimum at 1/2
    util = default_utility(2)
    val, x, p, gap = frank_wolfe(np.array([[1.0, 0.0], [0.0, 1.0]]), util)
    assert x == pytest.approx([0.5, 0.5], abs=1e-4) and gap < 1e-6


# time sharing

def test_state_path(random_model):
    g = random_model.evolution.next_state
    for s in range(2):
        for t in range(2):
            path = state_path(random_model, s, t)
            x = s
            for k in path:
                x = g[x, k]
            assert x == t


def test_time_sharing_realizes_mixture(random_model):
    util = default_utility(2)
    cyc = enumerate_basic_cycles(random_model, max_length=2)
    sol = solve_cycle_program(random_model, util, grid=4, cycles=cyc)
    cs, ws = zip(*sol.weights.items())
    s0, joint = time_sharing_schedule(random_model, cs, ws, block=100_000)
    total = sum(ws)
    assert np.allclose(schedule_rate(random_model, s0, joint), sol.rates / total, atol=1e-3)
