"""Content/discontent dynamics for an unknown, deterministically evolving state.

Each user keeps only its own last ``k_max`` (action, rate) pairs, a window
size ``K`` and a satisfaction bit ``q``. A content user replays the action it
took ``K`` slots ago unless it explores (probability ``eps**z``); a
discontent user picks uniformly. Contentment survives a slot only if the
replayed action produced exactly the rate seen ``K`` slots ago; otherwise
``K`` is redrawn and the user turns content with probability
``eps**(1 - U(mean of its last K rates))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._kernels import utility_value
from .errors import ContractError, DomainError
from .model import Deterministic, NetworkModel
from .results import RunResult, record_points
from .utility import UtilityProfile

DRAWS_PER_SLOT = 4  # explore, pick, window, accept
CHUNK = 1 << 15


@dataclass(frozen=True)
class Alg1Params:
    epsilon: float
    z: float
    k_max: int
    seed: int = 0
    rate_tol: float = 0.0
    num_users: int | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.k_max < 1:
            raise DomainError("k_max must be a positive integer")
        if self.num_users is not None:
            self.check_users(self.num_users)

    def check_users(self, n: int) -> None:
        if not self.z > n:
            raise DomainError(f"z must exceed the number of users ({n}), got {self.z}")


def user_rngs(seed: int, n: int):
    """Independent per-user streams keyed by (seed, user index)."""
    return [np.random.default_rng([seed, i]) for i in range(n)]


class Alg1Agent:
    """A single completely uncoupled user.

    The agent is handed its own association set, parameters, utility function
    and random stream, and afterwards only ever sees its own action and rate.
    """

    def __init__(self, aps, params: Alg1Params, utility, rng):
        self.aps = tuple(aps)
        self.kmax = params.k_max
        self.eps = params.epsilon
        self.eps_z = params.epsilon ** params.z
        self.tol = params.rate_tol
        self.utility = utility
        self.rng = rng
        default = self.aps.index(min(self.aps))
        self.actions = np.full(self.kmax, default, dtype=np.int64)
        self.rates = np.zeros(self.kmax)
        self.t = 0
        self.q = 0
        self.K = 1 + int(rng.random() * self.kmax)
        self._u = None

    def load(self, actions, rates, K: int, q: int, t: int) -> None:
        """Overwrite the memory; ``actions[j]``/``rates[j]`` belong to slot ``t - kmax + 1 + j``."""
        for j in range(self.kmax):
            slot = t - self.kmax + 1 + j
            self.actions[slot % self.kmax] = self.aps.index(actions[j])
            self.rates[slot % self.kmax] = rates[j]
        self.K, self.q, self.t = int(K), int(q), int(t)

    def choose(self) -> int:
        self._u = self.rng.random(DRAWS_PER_SLOT)
        if self.q == 1 and self._u[0] >= self.eps_z:
            pos = self.actions[(self.t + 1 - self.K) % self.kmax]
        else:
            pos = int(self._u[1] * len(self.aps))
        return self.aps[pos]

    def observe(self, ap: int, r: float) -> None:
        u = self._u
        tau = self.t + 1
        pos = self.aps.index(ap)
        j = (tau - self.K) % self.kmax
        keep = self.q == 1 and pos == self.actions[j] and abs(r - self.rates[j]) <= self.tol
        self.actions[tau % self.kmax] = pos
        self.rates[tau % self.kmax] = r
        self.t = tau
        if not keep:
            self.K = 1 + int(u[2] * self.kmax)
            total = 0.0
            for m in range(self.K):
                total += self.rates[(tau - m) % self.kmax]
            accept = self.eps ** (1.0 - self.utility(total / self.K))
            self.q = 1 if u[3] < accept else 0


@dataclass
class Alg1Start:
    """Joint starting memory, e.g. a chain state.

    ``window`` lists ``(state, joint index)`` pairs oldest first and has
    ``k_max`` entries; the network's next state is ``g`` of the newest one.
    """

    window: list
    K: tuple
    q: tuple


@njit(cache=True)
def _slot(rates, next_state, sizes, strides, kmax, eps, eps_z, tol,
          kinds, p0, p1, xs, ys, npts,
          acts, rts, K, q, st, u, pos, r_out):
    # st = [t, s_next]
    N = sizes.shape[0]
    t = st[0]
    s = st[1]
    tau = t + 1
    k = 0
    for i in range(N):
        if q[i] == 1 and u[i, 0] >= eps_z:
            pos[i] = acts[i, (tau - K[i]) % kmax]
        else:
            pos[i] = int(u[i, 1] * sizes[i])
        k += pos[i] * strides[i]
    for i in range(N):
        r = rates[s, k, i]
        r_out[i] = r
        j = (tau - K[i]) % kmax
        keep = q[i] == 1 and pos[i] == acts[i, j] and abs(r - rts[i, j]) <= tol
        acts[i, tau % kmax] = pos[i]
        rts[i, tau % kmax] = r
        if not keep:
            K[i] = 1 + int(u[i, 2] * kmax)
            total = 0.0
            for m in range(K[i]):
                total += rts[i, (tau - m) % kmax]
            acc = eps ** (1.0 - utility_value(kinds, p0, p1, xs, ys, npts, i, total / K[i]))
            q[i] = 1 if u[i, 3] < acc else 0
    st[0] = tau
    st[1] = next_state[s, k]
    return s, k


@njit(cache=True)
def _run_chunk(rates, next_state, sizes, strides, kmax, eps, eps_z, tol,
               kinds, p0, p1, xs, ys, npts,
               acts, rts, K, q, st, U, cum, rec_at, rec_ptr, rec_out,
               occ, count_from, trace_on, tr_s, tr_a, tr_r, tr_q, tr_K, tr_off):
    N = sizes.shape[0]
    B = U.shape[1]
    pos = np.empty(N, dtype=np.int64)
    r_out = np.empty(N)
    u = np.empty((N, 4))
    for b in range(B):
        for i in range(N):
            for c in range(4):
                u[i, c] = U[i, b, c]
        s, k = _slot(rates, next_state, sizes, strides, kmax, eps, eps_z, tol,
                     kinds, p0, p1, xs, ys, npts, acts, rts, K, q, st, u, pos, r_out)
        t = tr_off + b + 1
        for i in range(N):
            cum[i] += r_out[i]
        if t > count_from:
            occ[s, k] += 1
        if trace_on:
            row = tr_off + b
            tr_s[row] = s
            for i in range(N):
                tr_a[row, i] = pos[i]
                tr_r[row, i] = r_out[i]
                tr_q[row, i] = q[i]
                tr_K[row, i] = K[i]
        if rec_ptr[0] < rec_at.shape[0] and t == rec_at[rec_ptr[0]]:
            for i in range(N):
                rec_out[rec_ptr[0], i] = cum[i]
            rec_ptr[0] += 1


@njit(cache=True)
def _one_step_batch(rates, next_state, sizes, strides, kmax, eps, eps_z, tol,
                    kinds, p0, p1, xs, ys, npts,
                    acts0, rts0, K0, q0, st0, U, out_pos, out_K, out_q, out_s):
    N = sizes.shape[0]
    n = U.shape[1]
    pos = np.empty(N, dtype=np.int64)
    r_out = np.empty(N)
    u = np.empty((N, 4))
    for b in range(n):
        acts = acts0.copy()
        rts = rts0.copy()
        K = K0.copy()
        q = q0.copy()
        st = st0.copy()
        for i in range(N):
            for c in range(4):
                u[i, c] = U[i, b, c]
        s, k = _slot(rates, next_state, sizes, strides, kmax, eps, eps_z, tol,
                     kinds, p0, p1, xs, ys, npts, acts, rts, K, q, st, u, pos, r_out)
        out_s[b] = s
        for i in range(N):
            out_pos[b, i] = pos[i]
            out_K[b, i] = K[i]
            out_q[b, i] = q[i]


class _JointMemory:
    """Array form of every agent's memory, used by the compiled engine."""

    def __init__(self, model: NetworkModel, params: Alg1Params, rngs, start: Alg1Start | None, s0: int):
        N, kmax = model.num_users, params.k_max
        self.acts = np.zeros((N, kmax), dtype=np.int64)
        self.rts = np.zeros((N, kmax))
        self.K = np.empty(N, dtype=np.int64)
        self.q = np.zeros(N, dtype=np.int64)
        self.st = np.array([0, s0], dtype=np.int64)
        for i, A in enumerate(model.assoc_sets):
            self.acts[i, :] = A.index(min(A))
            self.K[i] = 1 + int(rngs[i].random() * kmax)
        if start is not None:
            self.load(model, params, start)

    def load(self, model, params, start: Alg1Start):
        kmax = params.k_max
        if len(start.window) != kmax:
            raise DomainError(f"start window needs {kmax} configurations")
        t = kmax
        for j, (s, k) in enumerate(start.window):
            slot = t - kmax + 1 + j
            self.acts[:, slot % kmax] = model.joint_positions[k]
            self.rts[:, slot % kmax] = model.rates[s, k]
        self.K[:] = start.K
        self.q[:] = start.q
        s_last, k_last = start.window[-1]
        self.st[:] = (t, model.evolution.next_state[s_last, k_last])


def _kernel_args(model: NetworkModel, utility: UtilityProfile, params: Alg1Params):
    return (np.ascontiguousarray(model.rates), np.ascontiguousarray(model.evolution.next_state),
            model.sizes, model.strides, params.k_max, params.epsilon, params.epsilon ** params.z,
            params.rate_tol) + utility.kernel_params()


def _check(model: NetworkModel, utility: UtilityProfile, params: Alg1Params):
    if not isinstance(model.evolution, Deterministic):
        raise ContractError(f"alg1 needs deterministic evolution, model has {model.evolution.kind}")
    params.check_users(model.num_users)
    if len(utility) != model.num_users:
        raise DomainError("utility profile size differs from the number of users")


def run_alg1(model: NetworkModel, utility: UtilityProfile, params: Alg1Params, horizon: int, *,
             initial_state: int = 0, start: Alg1Start | None = None, record_every: int | None = None,
             trace: bool = False, count_from: int | None = None, engine: str = "compiled") -> RunResult:
    """Simulate ``horizon`` slots.

    ``engine="python"`` drives one :class:`Alg1Agent` per user and is meant
    for short runs and cross-checks; the compiled engine consumes the same
    per-user random streams in the same order and produces the same trace.
    """
    _check(model, utility, params)
    if horizon < 1:
        raise DomainError("horizon must be positive")
    N = model.num_users
    rngs = user_rngs(params.seed, N)
    rec_at = record_points(horizon, record_every)
    count_from = horizon - horizon // 5 if count_from is None else count_from
    if engine == "python":
        return _run_python(model, utility, params, horizon, rngs, initial_state, start, rec_at, trace, count_from)
    if engine != "compiled":
        raise DomainError(f"unknown engine {engine!r}")

    mem = _JointMemory(model, params, rngs, start, model.check_state(initial_state))
    args = _kernel_args(model, utility, params)
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    rec_ptr = np.zeros(1, dtype=np.int64)
    occ = np.zeros((model.num_states, model.num_joint), dtype=np.int64)
    T = horizon if trace else 0
    tr_s = np.zeros(T, dtype=np.int64)
    tr_a = np.zeros((T, N), dtype=np.int64)
    tr_r = np.zeros((T, N))
    tr_q = np.zeros((T, N), dtype=np.int64)
    tr_K = np.zeros((T, N), dtype=np.int64)
    done = 0
    while done < horizon:
        B = min(CHUNK, horizon - done)
        U = np.stack([g.random((B, DRAWS_PER_SLOT)) for g in rngs])
        _run_chunk(*args, mem.acts, mem.rts, mem.K, mem.q, mem.st, U, cum, rec_at, rec_ptr, rec_out,
                   occ, count_from, trace, tr_s, tr_a, tr_r, tr_q, tr_K, done)
        done += B
    tr = None
    if trace:
        acts = np.take_along_axis(np.broadcast_to(_ap_table(model), (T,) + _ap_table(model).shape),
                                  tr_a[:, :, None], axis=2)[:, :, 0]
        tr = {"state": tr_s, "actions": acts, "rates": tr_r, "q": tr_q, "K": tr_K}
    return _result(model, utility, params, rec_at, rec_out, cum / horizon, tr, occ, "alg1")


def _ap_table(model: NetworkModel) -> np.ndarray:
    """``table[i, p]`` = AP at position ``p`` of user ``i``'s set (padded)."""
    width = int(model.sizes.max())
    tab = np.zeros((model.num_users, width), dtype=np.int64)
    for i, A in enumerate(model.assoc_sets):
        tab[i, : len(A)] = A
    return tab


def _result(model, utility, params, rec_at, rec_cum, final_rates, tr, occ, name) -> RunResult:
    avg = rec_cum / rec_at[:, None]
    return RunResult(algorithm=name, slots=rec_at, sum_utility=utility.total(avg),
                     final_rates=final_rates, params=dict(params.__dict__), trace=tr, occupancy=occ)


def _run_python(model, utility, params, horizon, rngs, initial_state, start, rec_at, trace, count_from):
    N = model.num_users
    agents = [Alg1Agent(A, params, utility[i], rngs[i]) for i, A in enumerate(model.assoc_sets)]
    g = model.evolution.next_state
    s = model.check_state(initial_state)
    if start is not None:
        kmax = params.k_max
        for i, ag in enumerate(agents):
            ag.load([model.joint_actions[k][i] for _, k in start.window],
                    [model.rates[st, k][i] for st, k in start.window], start.K[i], start.q[i], kmax)
        s_last, k_last = start.window[-1]
        s = int(g[s_last, k_last])
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    occ = np.zeros((model.num_states, model.num_joint), dtype=np.int64)
    tr = {"state": [], "actions": [], "rates": [], "q": [], "K": []} if trace else None
    ptr = 0
    for t in range(1, horizon + 1):
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
            tr["K"].append([ag.K for ag in agents])
        if ptr < len(rec_at) and t == rec_at[ptr]:
            rec_out[ptr] = cum
            ptr += 1
        s = int(g[s, k])
    if trace:
        tr = {key: np.asarray(v) for key, v in tr.items()}
    return _result(model, utility, params, rec_at, rec_out, cum / horizon, tr, occ, "alg1")


def one_step_samples(model: NetworkModel, utility: UtilityProfile, params: Alg1Params, start: Alg1Start,
                     n: int, seed: int = 0):
    """Draw ``n`` independent one-slot successors of ``start`` with the compiled engine.

    Returns arrays ``(state, positions, K, q)`` of the new configuration and
    memory per sample.
    """
    _check(model, utility, params)
    N = model.num_users
    rngs = user_rngs(seed, N)
    mem = _JointMemory(model, params, rngs, start, 0)
    U = np.stack([g.random((n, DRAWS_PER_SLOT)) for g in rngs])
    out_pos = np.zeros((n, N), dtype=np.int64)
    out_K = np.zeros((n, N), dtype=np.int64)
    out_q = np.zeros((n, N), dtype=np.int64)
    out_s = np.zeros(n, dtype=np.int64)
    _one_step_batch(*_kernel_args(model, utility, params), mem.acts, mem.rts, mem.K, mem.q, mem.st, U,
                    out_pos, out_K, out_q, out_s)
    return out_s, out_pos, out_K, out_q
