import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from checker_fixtures import EXPECTED_INTERDEPENDENCE, INTERDEPENDENCE, IRREDUCIBILITY
from uncoupled.errors import CapabilityError, ContractError, DomainError
from uncoupled.instances import default_utility, standard_instance
from uncoupled.model import (Configuration, ControlledMarkov, Deterministic, ExogenousErgodic, IidPerAction,
                             NetworkModel, average_rate, check_interdependence, check_irreducibility,
                             expected_rates, load_scenario, model_from_dict, model_to_dict, rate, save_scenario,
                             step, step_exogenous)


def one_user(rates, g=None, S=1, M=2):
    rates = np.asarray(rates, dtype=float).reshape(S, M, 1)
    g = np.zeros((S, M), dtype=int) if g is None else np.asarray(g)
    return NetworkModel(M, [tuple(range(M))], rates, Deterministic(g))


# construction

def test_rejects_bad_inputs():
    with pytest.raises(DomainError):
        NetworkModel(2, [()], np.zeros((1, 1, 1)), Deterministic(np.zeros((1, 1), int)))
    with pytest.raises(DomainError):
        NetworkModel(2, [(0, 2)], np.zeros((1, 2, 1)), Deterministic(np.zeros((1, 2), int)))
    with pytest.raises(DomainError):
        one_user([0.5, 1.5])
    with pytest.raises(DomainError):
        NetworkModel(2, [(0, 1)], np.zeros((1, 2, 1)), IidPerAction(np.array([[0.5, 0.6], [1.0, 0.0]]).T[:, :1]))
    with pytest.raises(DomainError):
        NetworkModel(2, [(0, 1)], np.zeros((2, 2, 1)), IidPerAction(np.array([[0.5, 0.6], [1.0, 0.0]])))


def test_model_is_immutable(standard):
    with pytest.raises(ValueError):
        standard.rates[0, 0, 0] = 1.0


# rate

def test_rate_table_lookup():
    # [TRIVIAL] table lookup identity
    m = one_user([0.7, 0.1])
    assert rate(m, Configuration(0, (0,))).tolist() == [0.7]


def test_rate_invalid_association_names_user(standard):
    with pytest.raises(DomainError, match="user 1"):
        rate(standard, Configuration(0, (0, 5)))


# step

def test_step_identity_transition():
    m = one_user([0.2, 0.3, 0.4, 0.5], g=[[0, 0], [1, 1]], S=2)
    assert step(m, 1, (0,)) == 1 and step(m, 0, (1,)) == 0


def test_step_deterministic_ignores_rng(standard):
    for s in range(2):
        for k in range(4):
            a = standard.action(k)
            assert step(standard, s, a, np.random.default_rng(1)) == step(standard, s, a, np.random.default_rng(2))


def test_step_iid_point_mass():
    pmf = np.array([[0.0, 1.0], [0.0, 1.0]])
    m = NetworkModel(2, [(0, 1)], np.zeros((2, 2, 1)), IidPerAction(pmf))
    rng = np.random.default_rng(0)
    assert all(step(m, 0, (a,), rng) == 1 for a in (0, 1) for _ in range(100))


def test_step_controlled_markov_frequency():
    # [DERIVED] Monte-Carlo against the declared kernel row (0.25, 0.75)
    kernel = np.tile([0.25, 0.75], (2, 2, 1))
    m = NetworkModel(2, [(0, 1)], np.zeros((2, 2, 1)), ControlledMarkov(kernel))
    rng = np.random.default_rng(7)
    hits = sum(step(m, 0, (1,), rng) for _ in range(100_000))
    assert abs(hits / 1e5 - 0.75) < 0.01


def test_iid_pmf_total_variation():
    # [DERIVED] empirical pmf within TV 0.02 over 1e5 draws
    pmf = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]])
    m = NetworkModel(2, [(0, 1)], np.zeros((3, 2, 1)), IidPerAction(pmf))
    rng = np.random.default_rng(3)
    for a in (0, 1):
        draws = [step(m, 0, (a,), rng) for _ in range(100_000)]
        emp = np.bincount(draws, minlength=3) / len(draws)
        assert 0.5 * np.abs(emp - pmf[a]).sum() < 0.02


def test_step_exogenous():
    Q = np.array([[0.0, 1.0, 0.0], [1 / 3, 1 / 3, 1 / 3], [0.5, 0.0, 0.5]])
    m = NetworkModel(2, [(0, 1)], np.zeros((3, 2, 1)), ExogenousErgodic(Q))
    rng = np.random.default_rng(11)
    assert all(step_exogenous(m, 0, rng) == 1 for _ in range(50))
    draws = np.array([step_exogenous(m, 1, rng) for _ in range(60_000)])
    assert np.all(np.abs(np.bincount(draws, minlength=3) / 60_000 - 1 / 3) < 0.01)
    with pytest.raises(ContractError):
        step(m, 0, (0,), rng)
    with pytest.raises(ContractError):
        step_exogenous(standard_instance(), 0, rng)


# average_rate

def test_average_rate_constant_model():
    m = one_user([0.3, 0.3, 0.3, 0.3], g=[[1, 0], [0, 1]], S=2)
    assert average_rate(m, 0, [(0,), (1,), (1,), (0,)]).tolist() == [0.3]


def test_average_rate_two_step_mean():
    # [TRIVIAL] user rates 0.2 then 0.8 along a 2-cycle
    m = one_user([0.2, 0.2, 0.8, 0.8], g=[[1, 1], [0, 0]], S=2)
    assert average_rate(m, 0, [(0,), (0,)]) == pytest.approx([0.5], abs=1e-15)
    with pytest.raises(DomainError):
        average_rate(m, 0, [])


# checkers

def _closure_reachable(adj):
    """Transitive closure by repeated boolean squaring (independent of BFS)."""
    R = adj | np.eye(len(adj), dtype=bool)
    while True:
        R2 = (R.astype(int) @ R.astype(int)) > 0
        if (R2 == R).all():
            return R
        R = R2


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_irreducibility_matches_transitive_closure(data):
    S = data.draw(st.integers(1, 4))
    M = data.draw(st.integers(1, 3))
    N = data.draw(st.integers(1, 2))
    nA = M ** N
    if S * nA > 64:
        return
    g = np.array(data.draw(st.lists(st.integers(0, S - 1), min_size=S * nA, max_size=S * nA))).reshape(S, nA)
    m = NetworkModel(M, [tuple(range(M))] * N, np.zeros((S, nA, N)), Deterministic(g))
    adj = np.zeros((S, S), dtype=bool)
    for s in range(S):
        adj[s, g[s]] = True
    R = _closure_reachable(adj)
    ok, witness = check_irreducibility(m)
    assert ok == bool(R.all())
    if not ok:
        s, t = witness
        assert not R[s, t]


@pytest.mark.parametrize("fixture", IRREDUCIBILITY)
def test_irreducibility_fixtures(fixture):
    model, ok, witness = fixture()
    assert check_irreducibility(model) == (ok, witness)


def test_single_state_irreducible():
    assert check_irreducibility(one_user([0.1, 0.2])) == (True, None)


@pytest.mark.parametrize("fixture", INTERDEPENDENCE)
def test_interdependence_fixtures(fixture):
    model, ok, witness = fixture()
    assert check_interdependence(model) == (ok, witness)


@pytest.mark.parametrize("fixture", EXPECTED_INTERDEPENDENCE)
def test_expected_interdependence_fixtures(fixture):
    model, ok, witness = fixture()
    assert check_interdependence(model, expected=True) == (ok, witness)
    # per-state check passes on both: the coupling is visible in every state
    assert check_interdependence(model)[0]


def test_interdependence_single_user_vacuous():
    assert check_interdependence(one_user([0.1, 0.2])) == (True, None)


def test_interdependence_guard():
    N = 13
    m = NetworkModel(1, [(0,)] * N, np.zeros((1, 1, N)), Deterministic(np.zeros((1, 1), int)))
    with pytest.raises(CapabilityError):
        check_interdependence(m)


def _brute_interdependent(model, table):
    """Direct definition: for every subset and every a, some outside user sees
    some deviation of the subset."""
    N, nA = model.num_users, model.num_joint
    pos = model.joint_positions
    for mask in range(1, 2 ** N - 1):
        inside = np.array([mask >> i & 1 for i in range(N)], dtype=bool)
        for k in range(nA):
            seen = False
            for k2 in range(nA):
                if np.array_equal(pos[k][~inside], pos[k2][~inside]) and np.any(table[k2][~inside] != table[k][~inside]):
                    seen = True
                    break
            if not seen:
                return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 3))
def test_interdependence_matches_definition(seed, N):
    # [DERIVED] exhaustive enumeration oracle on sparse random tables
    rng = np.random.default_rng(seed)
    nA = 2 ** N
    table = rng.choice([0.25, 0.5], size=(1, nA, N), p=[0.85, 0.15])
    m = NetworkModel(2, [(0, 1)] * N, table, Deterministic(np.zeros((1, nA), int)))
    assert check_interdependence(m)[0] == _brute_interdependent(m, table[0])


def test_expected_rates_iid():
    pmf = np.array([[1.0, 0.0], [0.25, 0.75]])
    rates = np.array([[[0.2], [0.2]], [[0.8], [0.6]]])
    m = NetworkModel(2, [(0, 1)], rates, IidPerAction(pmf))
    assert expected_rates(m)[:, 0] == pytest.approx([0.2, 0.25 * 0.2 + 0.75 * 0.6])


# serialization

def test_json_roundtrip(tmp_path, standard):
    util = default_utility(2)
    path = tmp_path / "s.json"
    save_scenario(path, standard, util)
    m2, u2 = load_scenario(path)
    assert np.array_equal(m2.rates, standard.rates)
    assert np.array_equal(m2.evolution.next_state, standard.evolution.next_state)
    assert m2.assoc_sets == standard.assoc_sets
    r = np.linspace(0, 1, 7)
    assert np.array_equal(u2.values(np.column_stack([r[:2], r[2:4]]).T), util.values(np.column_stack([r[:2], r[2:4]]).T))


@pytest.mark.parametrize("ev", [
    IidPerAction(np.full((4, 2), 0.5)),
    ControlledMarkov(np.full((2, 4, 2), 0.5)),
    ExogenousErgodic(np.array([[0.3, 0.7], [0.6, 0.4]])),
])
def test_json_roundtrip_evolutions(ev, standard):
    m = NetworkModel(2, standard.assoc_sets, standard.rates, ev)
    m2, u = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    assert u is None and m2.evolution.kind == ev.kind


def test_schema_rejects_missing_field(standard):
    import jsonschema
    doc = model_to_dict(standard)
    del doc["rate_table"]
    with pytest.raises(jsonschema.ValidationError):
        model_from_dict(doc)
