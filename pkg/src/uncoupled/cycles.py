"""Configuration cycles, the rate region and exact grid programs.

A configuration is a pair ``(s, k)`` of a state and a joint association
index. Under deterministic evolution the configurations form a directed
graph with an edge ``(s, k) -> (g(s, k), k')`` for every ``k'``; its simple
cycles are the basic configuration cycles. The achievable long-run rates are
the sub-convex hull of the cycle rates.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from numba import njit
from scipy.optimize import linprog, minimize_scalar

from .errors import CapabilityError, ContractError, DomainError
from .model import NetworkModel, expected_rates
from .utility import NormalizedLog, PiecewiseLinear, UtilityProfile

NODE_GUARD = 4096
CYCLE_GUARD = 1_000_000
GRID_GUARD = 5_000_000
HULL_TOL = 1e-9


@dataclass(frozen=True)
class ConfigurationCycle:
    """Cycle of configurations ``((s, k), ...)`` stored in canonical rotation."""

    configs: tuple

    def __post_init__(self):
        c = tuple((int(s), int(k)) for s, k in self.configs)
        if not c:
            raise DomainError("empty cycle")
        rot = min(c[j:] + c[:j] for j in range(len(c)))
        object.__setattr__(self, "configs", rot)

    def __len__(self):
        return len(self.configs)

    @property
    def is_basic(self) -> bool:
        return len(set(self.configs)) == len(self.configs)

    def is_consistent(self, model: NetworkModel) -> bool:
        g = model.evolution.next_state
        n = len(self.configs)
        return all(g[self.configs[j]] == self.configs[(j + 1) % n][0] for j in range(n))

    def to_dict(self, model: NetworkModel | None = None) -> dict:
        d = {"states": [s for s, _ in self.configs], "joint": [k for _, k in self.configs]}
        if model is not None:
            d["actions"] = [list(map(int, model.joint_actions[k])) for _, k in self.configs]
            d["rate"] = cycle_rate(model, self).tolist()
        return d


def _require_deterministic(model: NetworkModel):
    if not model.is_deterministic:
        raise ContractError(f"cycles need deterministic evolution, model has {model.evolution.kind}")


def configuration_graph(model: NetworkModel, guard: int = NODE_GUARD) -> nx.DiGraph:
    _require_deterministic(model)
    S, nA = model.num_states, model.num_joint
    if S * nA > guard:
        raise CapabilityError(f"|S x A| = {S * nA} exceeds the guard {guard}")
    g = model.evolution.next_state
    G = nx.DiGraph()
    G.add_nodes_from((s, k) for s in range(S) for k in range(nA))
    G.add_edges_from(((s, k), (int(g[s, k]), k2)) for s in range(S) for k in range(nA) for k2 in range(nA))
    return G


def enumerate_basic_cycles(model: NetworkModel, *, guard: int = NODE_GUARD, max_cycles: int = CYCLE_GUARD,
                           max_length: int | None = None) -> list[ConfigurationCycle]:
    """All basic configuration cycles, one per rotation class, sorted."""
    G = configuration_graph(model, guard)
    out = set()
    for cyc in nx.simple_cycles(G, length_bound=max_length):
        out.add(ConfigurationCycle(tuple(cyc)))
        if len(out) > max_cycles:
            raise CapabilityError(f"more than {max_cycles} basic cycles; pass max_length or coarsen the model")
    return sorted(out, key=lambda c: (len(c), c.configs))


def enumerate_short_cycles(model: NetworkModel, max_length: int) -> list[ConfigurationCycle]:
    """Cycles of length at most ``max_length`` (repeats allowed), without the node guard.

    Intended for large models where only short cycles matter. The search
    fixes the first configuration as the smallest one of the cycle.
    """
    _require_deterministic(model)
    g = model.evolution.next_state
    S, nA = model.num_states, model.num_joint
    out = set()

    def extend(path):
        s_next = int(g[path[-1]])
        if s_next == path[0][0] and path[0] == min(path):
            out.add(ConfigurationCycle(tuple(path)))
        if len(path) == max_length:
            return
        for k in range(nA):
            c = (s_next, k)
            if c >= path[0]:
                extend(path + [c])

    for s in range(S):
        for k in range(nA):
            extend([(s, k)])
    return sorted(out, key=lambda c: (len(c), c.configs))


def cycle_rate(model: NetworkModel, cycle: ConfigurationCycle) -> np.ndarray:
    return np.mean([model.rates[s, k] for s, k in cycle.configs], axis=0)


def cycle_rates(model: NetworkModel, cycles) -> np.ndarray:
    return np.array([cycle_rate(model, c) for c in cycles])


def hull_membership(point, rates, tol: float = HULL_TOL):
    """Is ``point`` dominated by a sub-convex combination of ``rates``?

    Returns ``(member, weights)``; ``weights`` is ``None`` for non-members.
    The feasibility LP maximizes the slack ``t`` in
    ``R^T p >= point + t``, ``sum p <= 1``, ``p >= 0``.
    """
    R = np.atleast_2d(np.asarray(rates, dtype=float))
    x = np.asarray(point, dtype=float)
    n, d = R.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([-R.T, np.ones((d, 1))])
    A = np.vstack([A, np.append(np.ones(n), 0.0)])
    b = np.append(-x, 1.0)
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * n + [(None, 1.0)], method="highs")
    if res.status != 0:
        raise RuntimeError(f"hull LP failed: {res.message}")
    slack = -res.fun
    if slack >= -tol:
        return True, res.x[:n]
    return False, None


# -- time sharing ------------------------------------------------------------

def schedule_rate(model: NetworkModel, s0: int, joint) -> np.ndarray:
    """Long-run rate of repeating the joint-index sequence ``joint`` forever from ``s0``."""
    _require_deterministic(model)
    g = model.evolution.next_state
    P = len(joint)
    seen = {}
    seq = []
    s, j = model.check_state(s0), 0
    while (s, j) not in seen:
        seen[(s, j)] = len(seq)
        k = joint[j]
        seq.append(model.rates[s, k])
        s, j = int(g[s, k]), (j + 1) % P
    return np.mean(seq[seen[(s, j)]:], axis=0)


def sequence_rate(model: NetworkModel, s0: int, joint) -> np.ndarray:
    """Average rate of playing ``joint`` once from ``s0``."""
    _require_deterministic(model)
    g = model.evolution.next_state
    s = model.check_state(s0)
    total = np.zeros(model.num_users)
    for k in joint:
        total += model.rates[s, k]
        s = int(g[s, k])
    return total / len(joint)


def state_path(model: NetworkModel, s: int, target: int) -> list[int]:
    """Shortest list of joint indices driving the state from ``s`` to ``target``."""
    _require_deterministic(model)
    g = model.evolution.next_state
    prev = {s: None}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == target:
            break
        for k in range(model.num_joint):
            v = int(g[u, k])
            if v not in prev:
                prev[v] = (u, k)
                queue.append(v)
    if target not in prev:
        raise DomainError(f"state {target} is unreachable from {s}")
    path = []
    v = target
    while prev[v] is not None:
        u, k = prev[v]
        path.append(k)
        v = u
    return path[::-1]


def time_sharing_schedule(model: NetworkModel, cycles, weights, block: int = 10_000):
    """Joint-index schedule spending a fraction ``weights[c]`` of time in cycle ``c``.

    Each cycle is repeated ``round(weights[c] * block / len(c))`` times and
    consecutive blocks are linked by shortest state paths. Returns
    ``(s0, joint)``; the transitions cost ``O(|S| / block)`` in rate.
    """
    w = np.asarray(weights, dtype=float)
    use = [(c, x) for c, x in zip(cycles, w) if x > 0]
    if not use:
        raise DomainError("all weights are zero")
    s0 = use[0][0].configs[0][0]
    s = s0
    joint = []
    for c, x in use:
        joint += state_path(model, s, c.configs[0][0])
        reps = max(1, round(x * block / len(c)))
        joint += [k for _, k in c.configs] * reps
        s = c.configs[0][0]
    joint += state_path(model, s, s0)
    return s0, joint


# -- grid programs -----------------------------------------------------------

@njit(cache=True)
def _pareto_mask(X, order):
    n, d = X.shape
    keep = np.zeros(n, dtype=np.bool_)
    kept = np.empty(n, dtype=np.int64)
    nk = 0
    for a in range(n):
        i = order[a]
        dominated = False
        for b in range(nk):
            j = kept[b]
            ge = True
            for c in range(d):
                if X[j, c] < X[i, c]:
                    ge = False
                    break
            if ge:
                dominated = True
                break
        if not dominated:
            keep[i] = True
            kept[nk] = i
            nk += 1
    return keep


def pareto_front(X) -> np.ndarray:
    """Indices of the weakly non-dominated rows of ``X`` (duplicates collapse to one)."""
    X = np.ascontiguousarray(X, dtype=float)
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort(X.T[::-1])[::-1]
    order = order[np.argsort(-X[order].sum(axis=1), kind="stable")]
    return np.flatnonzero(_pareto_mask(X, order))


def grid_count(n: int, K: int) -> int:
    return math.comb(n + K - 1, K)


def _multisets(n: int, K: int, guard: int):
    count = grid_count(n, K)
    if count > guard:
        raise CapabilityError(f"{count} grid points exceed the guard {guard}; coarsen the grid or prune")
    if K == 1:
        return np.arange(n)[:, None]
    return np.fromiter(itertools.chain.from_iterable(itertools.combinations_with_replacement(range(n), K)),
                       dtype=np.int64, count=count * K).reshape(count, K)


@dataclass
class GridSolution:
    """Maximizer of a grid program.

    ``weights`` maps an item label (cycle, joint index, ``(s, k)`` pair or
    joint control) to its grid weight.
    """

    value: float
    rates: np.ndarray
    weights: dict
    grid: int | None
    gap: float = 0.0
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def key(x):
            if isinstance(x, ConfigurationCycle):
                return str(list(x.configs))
            return str(x)
        return {"value": self.value, "rates": list(map(float, self.rates)), "grid": self.grid,
                "gap": self.gap, "weights": {key(k): float(v) for k, v in self.weights.items()}, **self.info}


def _prune(vectors, utility: UtilityProfile):
    """Candidate indices: Pareto front when every utility is increasing."""
    if utility.increasing:
        return pareto_front(vectors)
    return np.arange(len(vectors))


def grid_maximize(vectors, utility: UtilityProfile, K: int, *, allow_slack: bool = True,
                  guard: int = GRID_GUARD):
    """Exact maximum of ``sum_i U_i(sum_c p_c v_c)`` over ``p`` on the ``1/K`` grid.

    With ``allow_slack`` the weights may sum to less than one (a zero vector
    joins the candidates). Returns ``(value, rates, {index: weight})``.
    """
    V = np.asarray(vectors, dtype=float)
    if K < 1:
        raise DomainError("grid resolution K must be a positive integer")
    if allow_slack:
        V = np.vstack([V, np.zeros(V.shape[1])])
    cand = _prune(V, utility)
    M = _multisets(len(cand), K, guard)
    best_val, best_rates, best_row = -np.inf, None, None
    for lo in range(0, len(M), 1 << 16):
        rows = M[lo: lo + (1 << 16)]
        R = V[cand[rows]].mean(axis=1)
        vals = utility.total(R)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_rates, best_row = float(vals[j]), R[j], rows[j]
    weights = {}
    for r in best_row:
        idx = int(cand[r])
        if allow_slack and idx == len(V) - 1:
            continue
        weights[idx] = weights.get(idx, 0.0) + 1.0 / K
    return best_val, best_rates, weights


def frank_wolfe(vectors, utility: UtilityProfile, iters: int = 2000, tol: float = 1e-10):
    """Continuous maximization over the convex hull of ``vectors``.

    For concave utilities the returned duality gap bounds the suboptimality.
    """
    V = np.asarray(vectors, dtype=float)
    n = len(V)
    p = np.zeros(n)
    vals0 = utility.total(V)
    p[int(np.argmax(vals0))] = 1.0
    gap = np.inf
    for _ in range(iters):
        x = p @ V
        grad = utility.gradient(x)
        scores = V @ grad
        j = int(np.argmax(scores))
        gap = float(scores[j] - grad @ x)
        if gap <= tol:
            break
        d = V[j] - x
        res = minimize_scalar(lambda a: -utility.total(x + a * d), bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": 1e-12})
        a = float(res.x)
        if utility.total(x + a * d) <= utility.total(x):
            break
        p *= 1.0 - a
        p[j] += a
    x = p @ V
    return float(utility.total(x)), x, p, max(gap, 0.0)


def solve_cycle_program(model: NetworkModel, utility: UtilityProfile, grid: int | None = None, *,
                        cycles=None, max_length: int | None = None, guard: int = GRID_GUARD) -> GridSolution:
    """Best mixture of cycle rates.

    ``grid=K`` is exact over weights in ``{0, 1/K, ..., 1}``; ``grid=None``
    solves the continuous program and reports the Frank-Wolfe gap.
    """
    if cycles is None:
        cycles = enumerate_basic_cycles(model, max_length=max_length)
    cycles = list(cycles)
    if not cycles:
        raise DomainError("no configuration cycles")
    R = cycle_rates(model, cycles)
    if grid is None:
        val, x, p, gap = frank_wolfe(R, utility)
        w = {cycles[j]: float(p[j]) for j in np.flatnonzero(p > 1e-12)}
        return GridSolution(val, x, w, None, gap, {"num_cycles": len(cycles)})
    val, x, w = grid_maximize(R, utility, grid, guard=guard)
    return GridSolution(val, x, {cycles[j]: v for j, v in w.items()}, grid, 0.0, {"num_cycles": len(cycles)})


def best_single_cycle(model: NetworkModel, utility: UtilityProfile, cycles) -> tuple:
    """``(value, cycles attaining it)`` over single cycles, ties included."""
    cycles = list(cycles)
    vals = utility.total(cycle_rates(model, cycles))
    best = float(vals.max())
    return best, [c for c, v in zip(cycles, vals) if v >= best - 1e-12]


def solve_action_grid_program(model: NetworkModel, utility: UtilityProfile, K: int,
                              guard: int = GRID_GUARD) -> GridSolution:
    """Mixtures of joint associations with expected rates under unknown i.i.d. states."""
    R = expected_rates(model)
    val, x, w = grid_maximize(R, utility, K, guard=guard)
    return GridSolution(val, x, {int(k): v for k, v in w.items()}, K)


def _state_candidates(rates_s, K, utility, guard):
    """Per-state grid points (mean of K table rows), pruned, with their multisets."""
    V = np.asarray(rates_s, dtype=float)
    base = _prune(V, utility)
    M = _multisets(len(base), K, guard)
    P = V[base[M]].mean(axis=1)
    keep = _prune(P, utility)
    return P[keep], base[M[keep]]


def is_concave(utility: UtilityProfile) -> bool:
    for f in utility.functions:
        if isinstance(f, PiecewiseLinear):
            slopes = np.diff(f.ys) / np.diff(f.xs)
            if (np.diff(slopes) > 1e-15).any():
                return False
        elif not isinstance(f, NormalizedLog):
            return False
    return True


def frank_wolfe_blocks(blocks, utility: UtilityProfile, iters: int = 5000, tol: float = 1e-10):
    """Continuous maximum over the Minkowski sum of the hulls of ``blocks``.

    Returns ``(value, point, gap)``.
    """
    x = sum(B[int(np.argmax(utility.total(B)))] for B in blocks)
    gap = np.inf
    for _ in range(iters):
        grad = utility.gradient(x)
        v = sum(B[int(np.argmax(B @ grad))] for B in blocks)
        gap = float(grad @ (v - x))
        if gap <= tol:
            break
        d = v - x
        res = minimize_scalar(lambda a: -utility.total(x + a * d), bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": 1e-12})
        if utility.total(x + res.x * d) <= utility.total(x):
            break
        x = x + res.x * d
    return float(utility.total(x)), x, max(gap, 0.0)


def _local_search(blocks, utility):
    """Block coordinate ascent over one candidate per block; a feasible lower bound."""
    pick = [int(np.argmax(utility.total(B))) for B in blocks]
    x = sum(B[j] for B, j in zip(blocks, pick))
    best = float(utility.total(x))
    improved = True
    while improved:
        improved = False
        for b, B in enumerate(blocks):
            vals = utility.total(x - B[pick[b]] + B)
            j = int(np.argmax(vals))
            if vals[j] > best + 1e-15:
                x = x - B[pick[b]] + B[j]
                pick[b], best, improved = j, float(vals[j]), True
    return best, pick


def solve_state_grid_program(model: NetworkModel, utility: UtilityProfile, K: int, mu=None, *,
                             guard: int = GRID_GUARD) -> GridSolution:
    """Exact maximum over per-state grids ``p(a|s)`` weighted by ``mu(s)``.

    States are combined one at a time. Partial sums are Pareto-pruned (exact
    for increasing utilities) and, for concave utilities, discarded when a
    supergradient bound at the continuous optimum shows that no completion
    can beat a known feasible value.
    """
    if mu is None:
        from .known_state import _transition
        from .markov import stationary_distribution
        mu = stationary_distribution(_transition(model))
    mu = np.asarray(mu, dtype=float)
    S, N = model.num_states, model.num_users
    cands = [_state_candidates(model.rates[s], K, utility, guard) for s in range(S)]
    blocks = [mu[s] * P for s, (P, _) in enumerate(cands)]
    bound = None
    if is_concave(utility):
        lb, _ = _local_search(blocks, utility)
        ub, y, _ = frank_wolfe_blocks(blocks, utility)
        g = utility.gradient(y)
        rest = np.append(np.cumsum([float((B @ g).max()) for B in blocks][::-1])[::-1][1:], 0.0)
        bound = (ub, y, g, rest, lb)
    acc = np.zeros((1, N))
    choice = np.zeros((1, 0, K), dtype=np.int64)
    for s in range(S):
        B, M = blocks[s], cands[s][1]
        if bound is not None:
            ub, y, g, rest, lb = bound
            # U(acc + v + rest) <= U(y) + g.(acc + v - y) + rest_max; keep pairs that can reach lb
            thresh = lb - ub + g @ y - rest[s] - 1e-12
            sa, sb = acc @ g, B @ g
            ia, ib = np.nonzero(sa[:, None] + sb[None, :] >= thresh)
        else:
            ia, ib = np.divmod(np.arange(len(acc) * len(B)), len(B))
        if len(ia) > guard:
            raise CapabilityError(f"{len(ia)} partial sums at state {s} exceed the guard {guard}")
        acc = acc[ia] + B[ib]
        choice = np.concatenate([choice[ia], M[ib][:, None, :]], axis=1)
        keep = _prune(acc, utility) if s < S - 1 else np.arange(len(acc))
        acc, choice = acc[keep], choice[keep]
    vals = utility.total(acc)
    j = int(np.argmax(vals))
    weights = {}
    for s in range(S):
        for k in choice[j, s]:
            weights[(s, int(k))] = weights.get((s, int(k)), 0.0) + 1.0 / K
    return GridSolution(float(vals[j]), acc[j], weights, K, 0.0, {"mu": mu.tolist()})


def solve_control_grid_program(model: NetworkModel, utility: UtilityProfile, K: int, *,
                               limit: int = 1 << 16, guard: int = GRID_GUARD) -> GridSolution:
    """Mixtures of joint stationary controls with rates ``r(h)``."""
    from .frame import all_joint_controls, expected_payoff_control
    H = all_joint_controls(model, limit)
    R = np.array([expected_payoff_control(model, h) for h in H])
    val, x, w = grid_maximize(R, utility, K, guard=guard)
    return GridSolution(val, x, {tuple(H[j]): v for j, v in w.items()}, K, 0.0, {"num_controls": len(H)})
