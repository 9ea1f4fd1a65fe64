"""Frame-based content/discontent dynamics for a random, unobserved state.

Time is cut into frames of ``L`` slots. During a frame every user holds one
choice: an access point (``variant="iid"``) or a stationary control, i.e. a
map from states to access points (``variant="markov"``). Decisions use the
frame-average rate ``rbar(l)``; a content user stays content when it replayed
the choice from ``K`` frames back and ``|rbar(l) - rbar(l-K)| < delta``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._kernels import sample_index, utility_value
from .errors import CapabilityError, ContractError, DomainError
from .markov import slem, stationary_distribution
from .model import ControlledMarkov, ExogenousErgodic, IidPerAction, NetworkModel
from .results import RunResult, record_points
from .utility import PiecewiseLinear, UtilityProfile

DRAWS_PER_FRAME = 4  # explore, pick, (unused), accept
MAX_CONTROLS = 1 << 20
VARIANTS = ("iid", "markov")


@dataclass(frozen=True)
class FrameParams:
    epsilon: float
    z: float
    K: int
    L: int
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.K < 1 or self.L < 1:
            raise DomainError("K and L must be positive integers")
        if not self.delta > 0:
            raise DomainError("delta must be positive")

    def check_users(self, n: int) -> None:
        if not self.z > n:
            raise DomainError(f"z must exceed the number of users ({n}), got {self.z}")


def _frame_len_delta(epsilon: float, const: float):
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    L = math.ceil(1.0 / epsilon)
    delta = math.sqrt(const * math.log(1.0 / epsilon) / L)
    if delta > 1:
        warnings.warn(f"delta={delta:.3f} exceeds 1 at epsilon={epsilon}; the frame test is vacuous",
                      RuntimeWarning, stacklevel=3)
    return L, delta


def choose_frame_params_iid(epsilon: float, z: float, c2: float | None = None):
    """``L = ceil(1/eps)`` and the smallest ``delta`` with ``L delta^2 >= c2 log(1/eps)``.

    ``c2`` defaults to ``2 z``.
    """
    return _frame_len_delta(epsilon, 2.0 * z if c2 is None else c2)


def markov_constant(z: float, lambda_min: float) -> float:
    if not 0 <= lambda_min < 1:
        raise DomainError(f"lambda_min must lie in [0, 1), got {lambda_min}")
    return z * (1.0 - lambda_min) / (1.0 + lambda_min)


def choose_frame_params_markov(epsilon: float, z: float, lambda_min: float):
    """Frame rule for Markov states: constant ``z (1 - lambda) / (1 + lambda)``."""
    return _frame_len_delta(epsilon, markov_constant(z, lambda_min))


# -- stationary controls ---------------------------------------------------

def num_controls(model: NetworkModel) -> np.ndarray:
    return model.sizes.astype(np.int64) ** model.num_states


def control_table(model: NetworkModel, limit: int = MAX_CONTROLS) -> np.ndarray:
    """``tab[i, c, s]`` = position in ``A_i`` chosen in state ``s`` by control ``c`` of user ``i``.

    Control ``c`` is read as a base-``|A_i|`` number, state 0 least significant.
    """
    n = num_controls(model)
    if n.max() > limit:
        raise CapabilityError(f"{int(n.max())} stationary controls per user exceed the limit {limit}")
    S = model.num_states
    tab = np.zeros((model.num_users, int(n.max()), S), dtype=np.int64)
    for i, m in enumerate(model.sizes):
        c = np.arange(n[i])
        for s in range(S):
            tab[i, : n[i], s] = (c // m ** s) % m
    return tab


def joint_control(model: NetworkModel, controls) -> np.ndarray:
    """Joint association index per state for per-user control indices."""
    tab = control_table(model)
    return np.array([sum(tab[i, c, s] * model.strides[i] for i, c in enumerate(controls))
                     for s in range(model.num_states)], dtype=np.int64)


def induced_kernel(model: NetworkModel, controls) -> np.ndarray:
    ev = model.evolution
    if not isinstance(ev, ControlledMarkov):
        raise ContractError(f"controls need controlled-Markov evolution, model has {ev.kind}")
    ks = joint_control(model, controls)
    return np.array([ev.kernel[s, ks[s]] for s in range(model.num_states)])


def control_stationary(model: NetworkModel, controls) -> np.ndarray:
    """``mu(., h)`` of the chain induced by the joint control."""
    return stationary_distribution(induced_kernel(model, controls))


def expected_payoff_iid(model: NetworkModel, a) -> np.ndarray:
    """``E_{mu(.|a)} r(s, a)`` for joint association ``a``."""
    ev = model.evolution
    if not isinstance(ev, IidPerAction):
        raise ContractError(f"needs i.i.d. evolution, model has {ev.kind}")
    k = model.joint_index(a)
    return ev.pmf[k] @ model.rates[:, k, :]


def expected_payoff_control(model: NetworkModel, controls) -> np.ndarray:
    """``sum_s mu(s, h) r(s, h(s))``."""
    mu = control_stationary(model, controls)
    ks = joint_control(model, controls)
    return sum(mu[s] * model.rates[s, ks[s]] for s in range(model.num_states))


def all_joint_controls(model: NetworkModel, limit: int = 1 << 16):
    n = num_controls(model)
    total = int(np.prod(n.astype(float)))
    if total > limit:
        raise CapabilityError(f"{total} joint stationary controls exceed the limit {limit}")
    return list(itertools.product(*(range(int(m)) for m in n)))


def control_slems(model: NetworkModel, limit: int = 1 << 16) -> np.ndarray:
    """SLEM of the induced chain for every joint control."""
    return np.array([slem(induced_kernel(model, h)) for h in all_joint_controls(model, limit)])


# -- agents ----------------------------------------------------------------

class FrameAgent:
    """A single user under the frame rule; sees only its own frame history."""

    def __init__(self, num_choices: int, params: FrameParams, utility, rng):
        self.n = int(num_choices)
        self.K = params.K
        self.eps = params.epsilon
        self.eps_z = params.epsilon ** params.z
        self.delta = params.delta
        self.utility = utility
        self.rng = rng
        self.choices = np.zeros(self.K, dtype=np.int64)
        self.avgs = np.zeros(self.K)
        self.l = 0
        self.q = 0
        self._u = None

    def choose(self) -> int:
        self._u = self.rng.random(DRAWS_PER_FRAME)
        if self.q == 1 and self._u[0] >= self.eps_z:
            return int(self.choices[(self.l + 1) % self.K])
        return int(self._u[1] * self.n)

    def observe(self, choice: int, frame_avg: float) -> None:
        l = self.l + 1
        j = l % self.K
        keep = self.q == 1 and choice == self.choices[j] and abs(frame_avg - self.avgs[j]) < self.delta
        self.choices[j] = choice
        self.avgs[j] = frame_avg
        self.l = l
        if not keep:
            acc = self.eps ** (1.0 - self.utility(self.avgs.mean()))
            self.q = 1 if self._u[3] < acc else 0


# -- compiled engine -------------------------------------------------------

@njit(cache=True)
def _frames(rates, mode, cum_pmf, cum_kernel, sizes_c, strides, ctab, K, L, eps, eps_z, delta,
            kinds, p0, p1, xs, ys, npts, ch_mem, avg_mem, q, st, U, E, cum, rec_at, rec_ptr, rec_out,
            trace_on, tr_ch, tr_avg, tr_q, f_off, fixed):
    # st = [frame index, current state]
    N = sizes_c.shape[0]
    F = U.shape[1]
    S = rates.shape[0]
    ch = np.empty(N, dtype=np.int64)
    acc_r = np.empty(N)
    ks = np.empty(S, dtype=np.int64)
    for f in range(F):
        l = st[0] + 1
        j = l % K
        for i in range(N):
            if fixed[0] >= 0:
                ch[i] = fixed[i]
            elif q[i] == 1 and U[i, f, 0] >= eps_z:
                ch[i] = ch_mem[i, j]
            else:
                ch[i] = int(U[i, f, 1] * sizes_c[i])
        for s in range(S):
            k = 0
            for i in range(N):
                k += ctab[i, ch[i], s] * strides[i]
            ks[s] = k
        for i in range(N):
            acc_r[i] = 0.0
        s = st[1]
        for t in range(L):
            u = E[f, t]
            if mode == 0:
                k = ks[0]
                s = sample_index(cum_pmf[k], u)
                for i in range(N):
                    acc_r[i] += rates[s, k, i]
            else:
                k = ks[s]
                for i in range(N):
                    acc_r[i] += rates[s, k, i]
                s = sample_index(cum_kernel[s, k], u)
        st[1] = s
        for i in range(N):
            avg = acc_r[i] / L
            cum[i] += acc_r[i]
            keep = q[i] == 1 and ch[i] == ch_mem[i, j] and abs(avg - avg_mem[i, j]) < delta
            ch_mem[i, j] = ch[i]
            avg_mem[i, j] = avg
            if not keep:
                m = 0.0
                for jj in range(K):
                    m += avg_mem[i, jj]
                acc = eps ** (1.0 - utility_value(kinds, p0, p1, xs, ys, npts, i, m / K))
                q[i] = 1 if U[i, f, 3] < acc else 0
            if trace_on:
                tr_ch[f_off + f, i] = ch[i]
                tr_avg[f_off + f, i] = avg
                tr_q[f_off + f, i] = q[i]
        st[0] = l
        if rec_ptr[0] < rec_at.shape[0] and f_off + f + 1 == rec_at[rec_ptr[0]]:
            for i in range(N):
                rec_out[rec_ptr[0], i] = cum[i]
            rec_ptr[0] += 1


def _setup(model: NetworkModel, variant: str):
    ev = model.evolution
    S, nA = model.num_states, model.num_joint
    if variant == "iid":
        if not isinstance(ev, IidPerAction):
            raise ContractError(f"variant 'iid' needs i.i.d. evolution, model has {ev.kind}")
        ctab = np.zeros((model.num_users, int(model.sizes.max()), S), dtype=np.int64)
        for i, m in enumerate(model.sizes):
            ctab[i, :m, :] = np.arange(m)[:, None]
        return 0, np.cumsum(ev.pmf, axis=1), np.zeros((1, 1, 1)), model.sizes.copy(), ctab
    if variant == "markov":
        if not isinstance(ev, ControlledMarkov):
            raise ContractError(f"variant 'markov' needs controlled-Markov evolution, model has {ev.kind}")
        return 1, np.zeros((1, 1)), np.cumsum(ev.kernel, axis=2), num_controls(model), control_table(model)
    raise DomainError(f"unknown frame variant {variant!r}; expected one of {VARIANTS}")


def _rngs(seed: int, n: int):
    users = [np.random.default_rng([seed, i]) for i in range(n)]
    env = np.random.default_rng([seed, n, 1])
    return users, env


def run_frame(model: NetworkModel, utility: UtilityProfile, params: FrameParams, frames: int, *,
              variant: str = "iid", initial_state: int = 0, record_every: int | None = None,
              trace: bool = False, fixed_choice=None, engine: str = "compiled",
              chunk: int | None = None) -> RunResult:
    """Simulate ``frames`` frames; recorded slots are frame index times ``L``.

    ``fixed_choice`` pins every user's choice (AP position or control index)
    and is meant for concentration checks; the q-updates still run.
    """
    mode, cum_pmf, cum_kernel, nch, ctab = _setup(model, variant)
    params.check_users(model.num_users)
    if frames < 1:
        raise DomainError("frames must be positive")
    N = model.num_users
    users, env = _rngs(params.seed, N)
    rec_at = record_points(frames, record_every)
    fixed = np.full(N, -1, dtype=np.int64) if fixed_choice is None else np.asarray(fixed_choice, dtype=np.int64)
    if engine == "python":
        return _run_python(model, utility, params, frames, variant, users, env, nch, ctab, cum_pmf,
                           cum_kernel, mode, model.check_state(initial_state), rec_at, trace, fixed)
    if engine != "compiled":
        raise DomainError(f"unknown engine {engine!r}")
    kp = utility.kernel_params()
    ch_mem = np.zeros((N, params.K), dtype=np.int64)
    avg_mem = np.zeros((N, params.K))
    q = np.zeros(N, dtype=np.int64)
    st = np.array([0, model.check_state(initial_state)], dtype=np.int64)
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    rec_ptr = np.zeros(1, dtype=np.int64)
    T = frames if trace else 0
    tr_ch = np.zeros((T, N), dtype=np.int64)
    tr_avg = np.zeros((T, N))
    tr_q = np.zeros((T, N), dtype=np.int64)
    B = chunk or max(1, (1 << 22) // params.L)
    done = 0
    while done < frames:
        F = min(B, frames - done)
        U = np.stack([g.random((F, DRAWS_PER_FRAME)) for g in users])
        E = env.random((F, params.L))
        _frames(model.rates, mode, cum_pmf, cum_kernel, nch, model.strides, ctab, params.K, params.L,
                params.epsilon, params.epsilon ** params.z, params.delta, *kp, ch_mem, avg_mem, q, st, U, E,
                cum, rec_at, rec_ptr, rec_out, trace, tr_ch, tr_avg, tr_q, done, fixed)
        done += F
    tr = {"choice": tr_ch, "frame_avg": tr_avg, "q": tr_q} if trace else None
    return _result(utility, params, variant, rec_at, rec_out, cum / (frames * params.L), tr)


def _result(utility, params, variant, rec_at, rec_cum, final_rates, tr):
    avg = rec_cum / (rec_at[:, None] * params.L)
    info = dict(params.__dict__, variant=variant)
    return RunResult(algorithm=f"alg2-{variant}", slots=rec_at * params.L, sum_utility=utility.total(avg),
                     final_rates=final_rates, params=info, trace=tr)


def _run_python(model, utility, params, frames, variant, users, env, nch, ctab, cum_pmf, cum_kernel, mode,
                s, rec_at, trace, fixed):
    N, L = model.num_users, params.L
    agents = [FrameAgent(nch[i], params, utility[i], users[i]) for i in range(N)]
    cum = np.zeros(N)
    rec_out = np.zeros((len(rec_at), N))
    tr = {"choice": [], "frame_avg": [], "q": []} if trace else None
    ptr = 0
    B = max(1, (1 << 22) // L)
    E = None
    for f in range(frames):
        if f % B == 0:
            E = env.random((min(B, frames - f), L))
        ch = [ag.choose() for ag in agents]
        if fixed[0] >= 0:
            ch = [int(c) for c in fixed]
        ks = [sum(ctab[i, ch[i], st] * model.strides[i] for i in range(N)) for st in range(model.num_states)]
        acc = np.zeros(N)
        for t in range(L):
            u = E[f % B, t]
            if mode == 0:
                k = ks[0]
                s = min(int(np.searchsorted(cum_pmf[k], u, side="right")), model.num_states - 1)
                acc += model.rates[s, k]
            else:
                k = ks[s]
                acc += model.rates[s, k]
                s = min(int(np.searchsorted(cum_kernel[s, k], u, side="right")), model.num_states - 1)
        cum += acc
        for i, ag in enumerate(agents):
            ag.observe(ch[i], acc[i] / L)
        if trace:
            tr["choice"].append(ch)
            tr["frame_avg"].append(acc / L)
            tr["q"].append([ag.q for ag in agents])
        if ptr < len(rec_at) and f + 1 == rec_at[ptr]:
            rec_out[ptr] = cum
            ptr += 1
    if trace:
        tr = {k: np.asarray(v) for k, v in tr.items()}
    return _result(utility, params, variant, rec_at, rec_out, cum / (frames * L), tr)


def frame_averages(model: NetworkModel, choice, L: int, frames: int, *, variant: str = "iid",
                   initial_state: int = 0, seed: int = 0) -> np.ndarray:
    """Frame-average rates ``(frames, N)`` under a pinned joint choice."""
    N = model.num_users
    params = FrameParams(epsilon=0.5, z=N + 1, K=1, L=L, delta=1.0, seed=seed)
    res = run_frame(model, UtilityProfile.uniform(PiecewiseLinear.linear(0.5), N), params, frames, variant=variant,
                    initial_state=initial_state, trace=True, fixed_choice=choice, record_every=frames)
    return res.trace["frame_avg"]


__all__ = ["FrameParams", "FrameAgent", "choose_frame_params_iid", "choose_frame_params_markov",
           "markov_constant", "run_frame", "expected_payoff_iid", "expected_payoff_control",
           "control_stationary", "induced_kernel", "control_table", "joint_control", "all_joint_controls",
           "control_slems", "frame_averages", "slem", "stationary_distribution"]
