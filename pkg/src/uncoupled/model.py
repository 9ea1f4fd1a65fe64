"""Network model: users, access points, states, rates and state evolution."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapabilityError, ContractError, DomainError
from .markov import check_stochastic, stationary_distribution
from .utility import UtilityProfile

PMF_TOL = 1e-12
INTERDEPENDENCE_MAX_USERS = 12


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Deterministic:
    """``s(t+1) = next_state[s(t), joint_index(a(t))]``."""

    next_state: np.ndarray
    kind = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "next_state", _frozen(self.next_state, np.int64))


@dataclass(frozen=True)
class IidPerAction:
    """``s(t)`` drawn independently each slot from ``pmf[joint_index(a(t))]``."""

    pmf: np.ndarray
    kind = "iid"

    def __post_init__(self):
        object.__setattr__(self, "pmf", _frozen(self.pmf, float))

    @property
    def action_independent(self) -> bool:
        return bool(np.all(self.pmf == self.pmf[0]))


@dataclass(frozen=True)
class ControlledMarkov:
    """``P(s' | s, a) = kernel[s, joint_index(a), s']``."""

    kernel: np.ndarray
    kind = "controlled_markov"

    def __post_init__(self):
        object.__setattr__(self, "kernel", _frozen(self.kernel, float))


@dataclass(frozen=True)
class ExogenousErgodic:
    """Action-independent ergodic chain with transition matrix ``transition``."""

    transition: np.ndarray
    kind = "exogenous"

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition, float))
        object.__setattr__(self, "_mu", _frozen(stationary_distribution(self.transition), float))

    @property
    def stationary(self) -> np.ndarray:
        return self._mu


@dataclass(frozen=True)
class Configuration:
    s: int
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))


class NetworkModel:
    """Finite state-dependent association model.

    Parameters
    ----------
    num_aps : int
    assoc_sets : sequence of sequences
        ``assoc_sets[i]`` lists the APs user ``i`` may associate with.
    rates : array, shape (S, |A|, N)
        ``rates[s, k, i]`` is user ``i``'s rate in state ``s`` under the joint
        association with flat index ``k`` (row-major over users, user 0 slowest,
        positions within each ``assoc_sets[i]``).
    evolution : Deterministic | IidPerAction | ControlledMarkov | ExogenousErgodic
    """

    def __init__(self, num_aps: int, assoc_sets: Sequence[Sequence[int]], rates, evolution, name: str = ""):
        if num_aps < 1:
            raise DomainError("need at least one access point")
        if len(assoc_sets) < 1:
            raise DomainError("need at least one user")
        sets = []
        for i, A in enumerate(assoc_sets):
            A = tuple(int(x) for x in A)
            if not A:
                raise DomainError(f"user {i} has an empty association set")
            if len(set(A)) != len(A) or min(A) < 0 or max(A) >= num_aps:
                raise DomainError(f"user {i} association set {A} is not a subset of 0..{num_aps - 1}")
            sets.append(A)
        self.num_aps = int(num_aps)
        self.assoc_sets = tuple(sets)
        self.name = name
        self.sizes = np.array([len(A) for A in sets], dtype=np.int64)
        self.strides = np.ones(len(sets), dtype=np.int64)
        for i in range(len(sets) - 2, -1, -1):
            self.strides[i] = self.strides[i + 1] * self.sizes[i + 1]
        self.num_joint = int(np.prod(self.sizes))

        rates = np.asarray(rates, dtype=float)
        if rates.ndim != 3 or rates.shape[1:] != (self.num_joint, self.num_users):
            raise DomainError(f"rate table shape {rates.shape} does not match (S, {self.num_joint}, {self.num_users})")
        if rates.shape[0] < 1:
            raise DomainError("need at least one state")
        if np.isnan(rates).any() or rates.min() < 0 or rates.max() > 1:
            raise DomainError("every rate must lie in [0, 1]")
        self.rates = _frozen(rates, float)
        self.num_states = rates.shape[0]

        positions = np.array(list(itertools.product(*[range(n) for n in self.sizes])), dtype=np.int64)
        self.joint_positions = _frozen(positions.reshape(self.num_joint, self.num_users), np.int64)
        aps = np.empty_like(self.joint_positions)
        for i, A in enumerate(sets):
            aps[:, i] = np.asarray(A)[self.joint_positions[:, i]]
        self.joint_actions = _frozen(aps, np.int64)
        self._pos = [{ap: k for k, ap in enumerate(A)} for A in sets]
        self.evolution = self._check_evolution(evolution)

    @property
    def num_users(self) -> int:
        return len(self.assoc_sets)

    def _check_evolution(self, ev):
        S, nA = self.num_states, self.num_joint
        if isinstance(ev, Deterministic):
            g = ev.next_state
            if g.shape != (S, nA):
                raise DomainError(f"next_state must have shape {(S, nA)}, got {g.shape}")
            if g.min() < 0 or g.max() >= S:
                raise DomainError("next_state entries must be state indices")
        elif isinstance(ev, IidPerAction):
            if ev.pmf.shape != (nA, S):
                raise DomainError(f"pmf must have shape {(nA, S)}, got {ev.pmf.shape}")
            _check_rows(ev.pmf, "pmf")
        elif isinstance(ev, ControlledMarkov):
            if ev.kernel.shape != (S, nA, S):
                raise DomainError(f"kernel must have shape {(S, nA, S)}, got {ev.kernel.shape}")
            _check_rows(ev.kernel.reshape(S * nA, S), "kernel")
        elif isinstance(ev, ExogenousErgodic):
            if ev.transition.shape != (S, S):
                raise DomainError(f"transition must have shape {(S, S)}")
            check_stochastic(ev.transition, PMF_TOL)
        else:
            raise DomainError(f"unknown evolution {ev!r}")
        return ev

    # association indexing

    def positions(self, a) -> np.ndarray:
        a = tuple(a)
        if len(a) != self.num_users:
            raise DomainError(f"association vector has {len(a)} entries, expected {self.num_users}")
        out = np.empty(self.num_users, dtype=np.int64)
        for i, ap in enumerate(a):
            try:
                out[i] = self._pos[i][int(ap)]
            except KeyError:
                raise DomainError(f"user {i} cannot associate with AP {ap}; allowed {self.assoc_sets[i]}") from None
        return out

    def joint_index(self, a) -> int:
        return int(self.positions(a) @ self.strides)

    def joint_from_positions(self, pos) -> int:
        return int(np.asarray(pos) @ self.strides)

    def action(self, k: int) -> tuple:
        return tuple(int(x) for x in self.joint_actions[k])

    def configuration(self, s: int, k: int) -> Configuration:
        return Configuration(int(s), self.action(k))

    def check_state(self, s: int) -> int:
        if not 0 <= int(s) < self.num_states:
            raise DomainError(f"state {s} outside 0..{self.num_states - 1}")
        return int(s)

    # state evolution views

    @property
    def is_deterministic(self) -> bool:
        return isinstance(self.evolution, Deterministic)

    def state_pmf(self) -> np.ndarray | None:
        """Action-independent state pmf, if the evolution has one."""
        ev = self.evolution
        if isinstance(ev, ExogenousErgodic):
            return ev.stationary
        if isinstance(ev, IidPerAction) and ev.action_independent:
            return np.array(ev.pmf[0])
        return None

    def __repr__(self):
        return (f"NetworkModel(name={self.name!r}, N={self.num_users}, M={self.num_aps}, "
                f"S={self.num_states}, |A|={self.num_joint}, evolution={self.evolution.kind})")


def _check_rows(rows, what):
    rows = np.asarray(rows)
    if (rows < 0).any():
        raise DomainError(f"{what} has negative entries")
    err = np.abs(rows.sum(axis=-1) - 1.0)
    if (err > PMF_TOL).any():
        k = int(np.argmax(err))
        raise DomainError(f"{what} row {k} sums to {rows[k].sum()!r}, not 1")


def _sample(pmf, u: float) -> int:
    k = int(np.searchsorted(np.cumsum(pmf), u, side="right"))
    return min(k, len(pmf) - 1)


def rate(model: NetworkModel, c: Configuration) -> np.ndarray:
    """Rate vector of every user in configuration ``c``."""
    s = model.check_state(c.s)
    return np.array(model.rates[s, model.joint_index(c.a)])


def step(model: NetworkModel, s: int, a, rng=None) -> int:
    """Next state under deterministic, i.i.d. or controlled-Markov evolution."""
    ev = model.evolution
    s = model.check_state(s)
    k = model.joint_index(a)
    if isinstance(ev, Deterministic):
        return int(ev.next_state[s, k])
    if isinstance(ev, IidPerAction):
        return _sample(ev.pmf[k], rng.random())
    if isinstance(ev, ControlledMarkov):
        return _sample(ev.kernel[s, k], rng.random())
    raise ContractError("exogenous evolution ignores actions; use step_exogenous")


def step_exogenous(model: NetworkModel, s: int, rng) -> int:
    ev = model.evolution
    if not isinstance(ev, ExogenousErgodic):
        raise ContractError(f"step_exogenous needs exogenous evolution, model has {ev.kind}")
    return _sample(ev.transition[model.check_state(s)], rng.random())


def average_rate(model: NetworkModel, s0: int, actions) -> np.ndarray:
    """Per-user mean rate when ``actions`` is played once from ``s0``."""
    if not model.is_deterministic:
        raise ContractError("average_rate needs deterministic evolution")
    actions = list(actions)
    if not actions:
        raise DomainError("empty association sequence")
    g = model.evolution.next_state
    s = model.check_state(s0)
    total = np.zeros(model.num_users)
    for a in actions:
        k = model.joint_index(a)
        total += model.rates[s, k]
        s = int(g[s, k])
    return total / len(actions)


def state_graph(model: NetworkModel) -> np.ndarray:
    """Boolean adjacency ``s -> g(s, a)`` over all joint associations."""
    if not model.is_deterministic:
        raise ContractError("state graph needs deterministic evolution")
    S = model.num_states
    adj = np.zeros((S, S), dtype=bool)
    g = model.evolution.next_state
    adj[np.repeat(np.arange(S), model.num_joint), g.ravel()] = True
    return adj


def check_irreducibility(model: NetworkModel):
    """Return ``(True, None)`` or ``(False, (s, s_unreachable))``."""
    adj = state_graph(model)
    S = adj.shape[0]
    for s in range(S):
        seen = np.zeros(S, dtype=bool)
        seen[s] = True
        frontier = [s]
        while frontier:
            u = frontier.pop()
            for v in np.flatnonzero(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    frontier.append(int(v))
        if not seen.all():
            return False, (s, int(np.flatnonzero(~seen)[0]))
    return True, None


def expected_rates(model: NetworkModel) -> np.ndarray:
    """``E r(a)`` for every joint association, shape ``(|A|, N)``."""
    ev = model.evolution
    if isinstance(ev, IidPerAction):
        return np.einsum("ks,ski->ki", ev.pmf, model.rates)
    if isinstance(ev, ExogenousErgodic):
        return np.einsum("s,ski->ki", ev.stationary, model.rates)
    raise ContractError(f"expected rates are undefined for {ev.kind} evolution")


def check_interdependence(model: NetworkModel, expected: bool = False):
    """Check that no proper user subset is invisible to every outside user.

    With ``expected=False`` the check runs per state on the rate table; with
    ``expected=True`` it runs once on ``E r(a)``. Returns ``(True, None)`` or
    ``(False, witness)`` where the witness names the state (``None`` for the
    expected variant), the subset and an association vector.
    """
    N = model.num_users
    if N > INTERDEPENDENCE_MAX_USERS:
        raise CapabilityError(f"interdependence check enumerates 2^N subsets; N={N} exceeds {INTERDEPENDENCE_MAX_USERS}")
    tables = [(None, expected_rates(model))] if expected else [(s, model.rates[s]) for s in range(model.num_states)]
    shape = tuple(int(n) for n in model.sizes)
    for s, table in tables:
        f = table.reshape(shape + (N,))
        for mask in range(1, 2 ** N - 1):
            inside = tuple(i for i in range(N) if mask >> i & 1)
            outside = [j for j in range(N) if not mask >> j & 1]
            visible = np.zeros([shape[j] for j in outside], dtype=bool)
            for j in outside:
                fj = f[..., j]
                visible |= (fj.max(axis=inside) != fj.min(axis=inside))
            if not visible.all():
                rest = np.unravel_index(int(np.flatnonzero(~visible.ravel())[0]), visible.shape) if visible.ndim else ()
                pos = np.zeros(N, dtype=np.int64)
                for j, p in zip(outside, rest):
                    pos[j] = p
                return False, {"state": s, "subset": inside, "action": model.action(model.joint_from_positions(pos))}
    return True, None


# JSON scenario documents

def schema() -> dict:
    return json.loads(resources.files("uncoupled").joinpath("schema/scenario.schema.json").read_text())


def model_to_dict(model: NetworkModel, utility: UtilityProfile | None = None) -> dict:
    ev = model.evolution
    if isinstance(ev, Deterministic):
        evd = {"kind": "deterministic", "next_state": ev.next_state.tolist()}
    elif isinstance(ev, IidPerAction):
        evd = {"kind": "iid", "pmf": ev.pmf.tolist()}
    elif isinstance(ev, ControlledMarkov):
        evd = {"kind": "controlled_markov", "kernel": ev.kernel.tolist()}
    else:
        evd = {"kind": "exogenous", "transition": ev.transition.tolist()}
    doc = {
        "name": model.name,
        "num_users": model.num_users,
        "aps": model.num_aps,
        "assoc_sets": [list(A) for A in model.assoc_sets],
        "states": model.num_states,
        "rate_table": model.rates.tolist(),
        "evolution": evd,
    }
    if utility is not None:
        doc["utility"] = utility.to_dict()
    return doc


def evolution_from_dict(d: dict):
    kind = d["kind"]
    if kind == "deterministic":
        return Deterministic(np.array(d["next_state"]))
    if kind == "iid":
        return IidPerAction(np.array(d["pmf"]))
    if kind == "controlled_markov":
        return ControlledMarkov(np.array(d["kernel"]))
    if kind == "exogenous":
        return ExogenousErgodic(np.array(d["transition"]))
    raise DomainError(f"unknown evolution kind {kind!r}")


def model_from_dict(doc: dict):
    """Build ``(model, utility)`` from a scenario document.

    The document is validated against the packaged JSON schema first.
    ``utility`` is ``None`` when the document carries none.
    """
    import jsonschema

    jsonschema.validate(doc, schema())
    if len(doc["assoc_sets"]) != doc["num_users"]:
        raise DomainError("assoc_sets length differs from num_users")
    if len(doc["rate_table"]) != doc["states"]:
        raise DomainError("rate_table length differs from states")
    model = NetworkModel(doc["aps"], doc["assoc_sets"], np.array(doc["rate_table"], dtype=float),
                         evolution_from_dict(doc["evolution"]), name=doc.get("name", ""))
    utility = UtilityProfile.from_dict(doc["utility"], model.num_users) if "utility" in doc else None
    return model, utility


def load_scenario(path):
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_dict(doc)


def save_scenario(path, model: NetworkModel, utility: UtilityProfile | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, utility), indent=1))
