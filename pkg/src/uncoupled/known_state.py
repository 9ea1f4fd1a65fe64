"""Content/discontent dynamics when users observe the state before acting.

Each user keeps, for every state ``s``, the associations and rates of the
last ``K`` visits to ``s`` (``j = 0`` oldest, ``j = K - 1`` newest) and counts
how often each state occurred. A content user replays the association from
the oldest remembered visit of the current state. The acceptance draw uses
an average of per-state buffer means weighted by observed state frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._kernels import sample_index, utility_value
from .errors import ContractError, DomainError
from .model import ExogenousErgodic, IidPerAction, NetworkModel
from .results import RunResult, record_points
from .utility import UtilityProfile

DRAWS_PER_SLOT = 3  # explore, pick, accept
CHUNK = 1 << 15


@dataclass(frozen=True)
class KnownStateParams:
    epsilon: float
    z: float
    K: int
    seed: int = 0
    rate_tol: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.K < 1:
            raise DomainError("K must be a positive integer")

    def check_users(self, n: int) -> None:
        if not self.z > n:
            raise DomainError(f"z must exceed the number of users ({n}), got {self.z}")


def weighted_average_payoff(hist_rates, counts, s: int, r: float) -> float:
    """Occupancy-weighted payoff estimate.

    ``hist_rates[s]`` holds the last ``K`` rates seen in state ``s`` (oldest
    first) and ``counts`` already includes the current visit to ``s``. The
    oldest entry of ``s`` is replaced by the current rate ``r``.
    """
    hist_rates = np.asarray(hist_rates, dtype=float)
    counts = np.asarray(counts, dtype=float)
    t = counts.sum()
    if t <= 0:
        raise DomainError("weighted average needs at least one observed slot")
    K = hist_rates.shape[1]
    means = hist_rates.mean(axis=1)
    means[s] = (hist_rates[s, 1:].sum() + r) / K
    return float(counts @ means / t)


class KnownStateAgent:
    """A single user that sees the state, its own associations and its own rates."""

    def __init__(self, aps, num_states: int, params: KnownStateParams, utility, rng):
        self.aps = tuple(aps)
        self.K = params.K
        self.eps = params.epsilon
        self.eps_z = params.epsilon ** params.z
        self.tol = params.rate_tol
        self.utility = utility
        self.rng = rng
        default = self.aps.index(min(self.aps))
        self.actions = np.full((num_states, self.K), default, dtype=np.int64)
        self.rates = np.zeros((num_states, self.K))
        self.counts = np.zeros(num_states, dtype=np.int64)
        self.q = 0
        self._u = None
        self._s = None

    @property
    def t(self) -> int:
        return int(self.counts.sum())

    def see_state(self, s: int) -> None:
        self._s = s
        self.counts[s] += 1

    def choose(self) -> int:
        self._u = self.rng.random(DRAWS_PER_SLOT)
        if self.q == 1 and self._u[0] >= self.eps_z:
            return self.aps[self.actions[self._s, 0]]
        return self.aps[int(self._u[1] * len(self.aps))]

    def observe(self, ap: int, r: float) -> None:
        s = self._s
        pos = self.aps.index(ap)
        keep = self.q == 1 and pos == self.actions[s, 0] and abs(r - self.rates[s, 0]) <= self.tol
        if not keep:
            rbar = weighted_average_payoff(self.rates, self.counts, s, r)
            self.q = 1 if self._u[2] < self.eps ** (1.0 - self.utility(rbar)) else 0
        self.actions[s, :-1] = self.actions[s, 1:]
        self.rates[s, :-1] = self.rates[s, 1:]
        self.actions[s, -1] = pos
        self.rates[s, -1] = r


@njit(cache=True)
def _run_chunk(rates, cum_tr, sizes, strides, K, eps, eps_z, tol, kinds, p0, p1, xs, ys, npts,
               acts, rts, counts, q, st, U, E, cum, rec_at, rec_ptr, rec_out, occ, count_from,
               trace_on, tr_s, tr_a, tr_r, tr_q, t_off):
    # st = [previous state or -1 before the first slot]
    N = sizes.shape[0]
    S = rates.shape[0]
    B = U.shape[1]
    pos = np.empty(N, dtype=np.int64)
    for b in range(B):
        if st[0] < 0:
            s = st[1]
        else:
            s = sample_index(cum_tr[st[0]], E[b])
        st[0] = s
        counts[s] += 1
        k = 0
        for i in range(N):
            if q[i] == 1 and U[i, b, 0] >= eps_z:
                pos[i] = acts[i, s, 0]
            else:
                pos[i] = int(U[i, b, 1] * sizes[i])
            k += pos[i] * strides[i]
        t = 0
        for ss in range(S):
            t += counts[ss]
        for i in range(N):
            r = rates[s, k, i]
            keep = q[i] == 1 and pos[i] == acts[i, s, 0] and abs(r - rts[i, s, 0]) <= tol
            if not keep:
                total = 0.0
                for ss in range(S):
                    if counts[ss] == 0:
                        continue
                    m = 0.0
                    if ss == s:
                        for j in range(1, K):
                            m += rts[i, ss, j]
                        m += r
                    else:
                        for j in range(K):
                            m += rts[i, ss, j]
                    total += counts[ss] * (m / K)
                rbar = total / t
                acc = eps ** (1.0 - utility_value(kinds, p0, p1, xs, ys, npts, i, rbar))
                q[i] = 1 if U[i, b, 2] < acc else 0
            for j in range(K - 1):
                acts[i, s, j] = acts[i, s, j + 1]
                rts[i, s, j] = rts[i, s, j + 1]
            acts[i, s, K - 1] = pos[i]
            rts[i, s, K - 1] = r
            cum[i] += r
        tt = t_off + b + 1
        if tt > count_from:
            occ[s, k] += 1
        if trace_on:
            tr_s[tt - 1] = s
            for i in range(N):
                tr_a[tt - 1, i] = pos[i]
                tr_r[tt - 1, i] = rates[s, k, i]
                tr_q[tt - 1, i] = q[i]
        if rec_ptr[0] < rec_at.shape[0] and tt == rec_at[rec_ptr[0]]:
            for i in range(N):
                rec_out[rec_ptr[0], i] = cum[i]
            rec_ptr[0] += 1


def _transition(model: NetworkModel) -> np.ndarray:
    ev = model.evolution
    if isinstance(ev, ExogenousErgodic):
        return np.asarray(ev.transition)
    if isinstance(ev, IidPerAction) and ev.action_independent:
        return np.tile(ev.pmf[0], (model.num_states, 1))
    raise ContractError(f"known-state dynamics need exogenous evolution, model has {ev.kind}")


def _rngs(seed: int, n: int):
    return [np.random.default_rng([seed, i]) for i in range(n)], np.random.default_rng([seed, n, 3])


def run_alg3(model: NetworkModel, utility: UtilityProfile, params: KnownStateParams, horizon: int, *,
             initial_state: int = 0, record_every: int | None = None, trace: bool = False,
             count_from: int | None = None, engine: str = "compiled") -> RunResult:
    """Simulate ``horizon`` slots.

    The first state is ``initial_state``; later states follow the exogenous
    chain. ``occupancy[s, k]`` counts slots after ``count_from`` (default: the
    last 20% of the horizon) and ``extras["state_counts"]`` holds ``t_s``.
    """
    P = _transition(model)
    params.check_users(model.num_users)
    if horizon < 1:
        raise DomainError("horizon must be positive")
    N, S = model.num_users, model.num_states
    users, env = _rngs(params.seed, N)
    rec_at = record_points(horizon, record_every)
    count_from = horizon - horizon // 5 if count_from is None else count_from
    s0 = model.check_state(initial_state)
    if engine == "python":
        return _run_python(model, utility, params, horizon, P, users, env, s0, rec_at, trace, count_from)
    if engine != "compiled":
        raise DomainError(f"unknown engine {engine!r}")
    kp = utility.kernel_params()
    acts = np.zeros((N, S, params.K), dtype=np.int64)
    for i, A in enumerate(model.assoc_sets):
        acts[i] = A.index(min(A))
    rts = np.zeros((N, S, params.K))
    counts = np.zeros(S, dtype=np.int64)
    q = np.zeros(N, dtype=np.int64)
    st = np.array([-1, s0], dtype=np.int64)
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    rec_ptr = np.zeros(1, dtype=np.int64)
    occ = np.zeros((S, model.num_joint), dtype=np.int64)
    T = horizon if trace else 0
    tr_s = np.zeros(T, dtype=np.int64)
    tr_a = np.zeros((T, N), dtype=np.int64)
    tr_r = np.zeros((T, N))
    tr_q = np.zeros((T, N), dtype=np.int64)
    cum_tr = np.cumsum(P, axis=1)
    done = 0
    while done < horizon:
        B = min(CHUNK, horizon - done)
        U = np.stack([g.random((B, DRAWS_PER_SLOT)) for g in users])
        E = env.random(B)
        _run_chunk(model.rates, cum_tr, model.sizes, model.strides, params.K, params.epsilon,
                   params.epsilon ** params.z, params.rate_tol, *kp, acts, rts, counts, q, st, U, E, cum,
                   rec_at, rec_ptr, rec_out, occ, count_from, trace, tr_s, tr_a, tr_r, tr_q, done)
        done += B
    tr = None
    if trace:
        tab = np.zeros((N, int(model.sizes.max())), dtype=np.int64)
        for i, A in enumerate(model.assoc_sets):
            tab[i, : len(A)] = A
        tr = {"state": tr_s, "actions": tab[np.arange(N), tr_a], "rates": tr_r, "q": tr_q}
    return _result(utility, params, rec_at, rec_out, cum / horizon, tr, occ, counts)


def _result(utility, params, rec_at, rec_cum, final_rates, tr, occ, counts):
    avg = rec_cum / rec_at[:, None]
    return RunResult(algorithm="alg3", slots=rec_at, sum_utility=utility.total(avg), final_rates=final_rates,
                     params=dict(params.__dict__), trace=tr, occupancy=occ,
                     extras={"state_counts": np.asarray(counts).copy()})


def _run_python(model, utility, params, horizon, P, users, env, s0, rec_at, trace, count_from):
    N, S = model.num_users, model.num_states
    agents = [KnownStateAgent(A, S, params, utility[i], users[i]) for i, A in enumerate(model.assoc_sets)]
    cum_tr = np.cumsum(P, axis=1)
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    occ = np.zeros((S, model.num_joint), dtype=np.int64)
    counts = np.zeros(S, dtype=np.int64)
    tr = {"state": [], "actions": [], "rates": [], "q": []} if trace else None
    ptr = 0
    s = None
    E = None
    for t in range(1, horizon + 1):
        if (t - 1) % CHUNK == 0:
            E = env.random(min(CHUNK, horizon - t + 1))
        u = E[(t - 1) % CHUNK]
        s = s0 if s is None else min(int(np.searchsorted(cum_tr[s], u, side="right")), S - 1)
        counts[s] += 1
        for ag in agents:
            ag.see_state(s)
        a = [ag.choose() for ag in agents]
        k = model.joint_index(a)
        r = model.rates[s, k]
        for i, ag in enumerate(agents):
            ag.observe(a[i], float(r[i]))
        cum += r
        if t > count_from:
            occ[s, k] += 1
        if trace:
            tr["state"].append(s)
            tr["actions"].append(a)
            tr["rates"].append(np.array(r))
            tr["q"].append([ag.q for ag in agents])
        if ptr < len(rec_at) and t == rec_at[ptr]:
            rec_out[ptr] = cum
            ptr += 1
    if trace:
        tr = {key: np.asarray(v) for key, v in tr.items()}
    return _result(utility, params, rec_at, rec_out, cum / horizon, tr, occ, counts)


def occupancy_rates(model: NetworkModel, occupancy, mu=None) -> np.ndarray:
    """Rates implied by the empirical per-state association distribution.

    ``p(a|s)`` is read from ``occupancy`` and weighted by ``mu`` (default: the
    exogenous stationary law) so the result is comparable with the per-state
    grid program.
    """
    occ = np.asarray(occupancy, dtype=float)
    if mu is None:
        P = _transition(model)
        from .markov import stationary_distribution
        mu = stationary_distribution(P)
    tot = occ.sum(axis=1, keepdims=True)
    p = np.divide(occ, tot, out=np.zeros_like(occ), where=tot > 0)
    return np.einsum("s,sk,ski->i", np.asarray(mu), p, model.rates)
