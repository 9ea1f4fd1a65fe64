"""Exact perturbed Markov chain of the content/discontent dynamics.

A chain state holds the last ``k_max`` configurations, the window sizes
``K`` and the satisfaction bits ``q``. Every transition probability is a
polynomial in ``eps`` with real exponents, kept as ``(coefficient, exponent)``
terms, so resistances are read off symbolically and the matrix can be
evaluated at any ``eps``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.sparse.linalg import spsolve

from .cycles import ConfigurationCycle
from .errors import AnalysisError, CapabilityError, ContractError, DomainError
from .model import NetworkModel
from .utility import UtilityProfile

STATE_GUARD = 100_000
SOLVE_GUARD = 10_000
EXP_DIGITS = 12
COEF_TOL = 1e-14
TIE_TOL = 1e-12


@dataclass
class Chain:
    """Sparse polynomial transition matrix over the full state space.

    Term arrays ``t_row, t_col, t_coef, t_exp`` list every monomial; edge
    arrays ``row, col`` list distinct nonzero transitions with their
    ``resistance`` and ``p0`` (value at ``eps = 0``).
    """

    model: NetworkModel
    utility: UtilityProfile
    z: float
    k_max: int
    rate_tol: float
    size: int
    t_row: np.ndarray
    t_col: np.ndarray
    t_coef: np.ndarray
    t_exp: np.ndarray
    row: np.ndarray
    col: np.ndarray
    resistance: np.ndarray
    p0: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    # -- indexing --------------------------------------------------------
    @property
    def num_configs(self) -> int:
        return self.model.num_states * self.model.num_joint

    @property
    def num_k(self) -> int:
        return self.k_max ** self.model.num_users

    @property
    def num_q(self) -> int:
        return 2 ** self.model.num_users

    def encode(self, window, K, q) -> int:
        """``window`` is a list of ``(s, k)`` oldest first; ``K`` and ``q`` per user."""
        nA = self.model.num_joint
        w = 0
        for s, k in window:
            w = w * self.num_configs + s * nA + k
        ki = 0
        for x in K:
            ki = ki * self.k_max + (x - 1)
        qi = 0
        for x in q:
            qi = qi * 2 + x
        return (w * self.num_k + ki) * self.num_q + qi

    def decode(self, idx: int):
        N, nA, C = self.model.num_users, self.model.num_joint, self.num_configs
        w, rem = divmod(int(idx), self.num_k * self.num_q)
        ki, qi = divmod(rem, self.num_q)
        window = []
        for _ in range(self.k_max):
            w, c = divmod(w, C)
            window.append(divmod(c, nA))
        K, q = [], []
        for _ in range(N):
            ki, d = divmod(ki, self.k_max)
            K.append(d + 1)
            qi, b = divmod(qi, 2)
            q.append(b)
        return window[::-1], tuple(K[::-1]), tuple(q[::-1])

    def q_array(self) -> np.ndarray:
        """``q[idx, i]`` for every state."""
        N = self.model.num_users
        qi = np.arange(self.size) % self.num_q
        return (qi[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1

    def consistent(self) -> np.ndarray:
        """States whose window obeys the state transition map."""
        if "consistent" not in self._cache:
            g = self.model.evolution.next_state
            nA, C = self.model.num_joint, self.num_configs
            w = np.arange(self.size) // (self.num_k * self.num_q)
            ok = np.ones(self.size, dtype=bool)
            digits = []
            for _ in range(self.k_max):
                w, c = np.divmod(w, C)
                digits.append(c)
            digits = digits[::-1]
            for a, b in zip(digits[:-1], digits[1:]):
                ok &= g[a // nA, a % nA] == b // nA
            self._cache["consistent"] = ok
        return self._cache["consistent"]

    # -- evaluation ------------------------------------------------------
    def matrix(self, eps: float) -> sp.csr_matrix:
        if not 0 <= eps < 1:
            raise DomainError(f"eps must lie in [0, 1), got {eps}")
        with np.errstate(divide="ignore"):
            vals = self.t_coef * np.where(self.t_exp == 0, 1.0, eps ** self.t_exp)
        M = sp.coo_matrix((vals, (self.t_row, self.t_col)), shape=(self.size, self.size)).tocsr()
        M.sum_duplicates()
        return M

    def resistance_graph(self) -> sp.csr_matrix:
        """One-step resistances; zero-resistance edges stored as explicit zeros."""
        if "rgraph" not in self._cache:
            self._cache["rgraph"] = sp.csr_matrix((self.resistance, (self.row, self.col)),
                                                  shape=(self.size, self.size))
        return self._cache["rgraph"]

    def polynomial(self, a: int, b: int) -> list:
        """Merged ``(coefficient, exponent)`` terms of ``P(a -> b)``."""
        m = (self.t_row == a) & (self.t_col == b)
        return sorted(zip(self.t_coef[m].tolist(), self.t_exp[m].tolist()), key=lambda t: t[1])


def _poly_mul(p, q):
    return [(a * c, e + f) for a, e in p for c, f in q]


def build_chain(model: NetworkModel, utility: UtilityProfile, z: float, k_max: int, *,
                rate_tol: float = 0.0, guard: int = STATE_GUARD) -> Chain:
    """Enumerate every state and its one-step transition polynomials."""
    if not model.is_deterministic:
        raise ContractError(f"chain needs deterministic evolution, model has {model.evolution.kind}")
    if not z > model.num_users:
        raise DomainError(f"z must exceed the number of users ({model.num_users}), got {z}")
    if k_max < 1:
        raise DomainError("k_max must be a positive integer")
    N, S, nA = model.num_users, model.num_states, model.num_joint
    C = S * nA
    size = C ** k_max * k_max ** N * 2 ** N
    if size > guard:
        raise CapabilityError(f"|Omega| = {size} exceeds the guard {guard}")
    ch = Chain(model, utility, float(z), int(k_max), rate_tol, size, *(np.zeros(0),) * 8)
    g = model.evolution.next_state
    R = model.rates
    P = model.joint_positions
    sizes = model.sizes
    Ufn = utility.functions
    rows, cols, coefs, exps = [], [], [], []
    e_row, e_col, e_res, e_p0 = [], [], [], []
    for idx in range(size):
        window, K, q = ch.decode(idx)
        s_new = int(g[window[-1]])
        w_tail = 0
        for s, kk in window[1:]:
            w_tail = w_tail * C + s * nA + kk
        old = [window[k_max - K[i]] for i in range(N)]
        rep = [int(P[old[i][1], i]) for i in range(N)]
        act_polys = []
        for i in range(N):
            n = int(sizes[i])
            if q[i] == 1:
                hit = [(1.0, 0.0)] + ([(-(1.0 - 1.0 / n), z)] if n > 1 else [])
                act_polys.append((rep[i], hit, [(1.0 / n, z)]))
            else:
                act_polys.append((None, [(1.0 / n, 0.0)], [(1.0 / n, 0.0)]))
        merged = {}
        for k in range(nA):
            pos = P[k]
            r_new = R[s_new, k]
            base = [(1.0, 0.0)]
            for i in range(N):
                r_i, hit, miss = act_polys[i]
                base = _poly_mul(base, hit if pos[i] == r_i else miss)
            user_out = []
            for i in range(N):
                keep = (q[i] == 1 and pos[i] == rep[i]
                        and abs(r_new[i] - R[old[i][0], old[i][1], i]) <= rate_tol)
                if keep:
                    user_out.append([(K[i], 1, [(1.0, 0.0)])])
                    continue
                hist = [R[s, kk, i] for s, kk in window[1:]] + [r_new[i]]
                outs = []
                for K2 in range(1, k_max + 1):
                    a = 1.0 - float(Ufn[i](sum(hist[-K2:]) / K2))
                    outs.append((K2, 1, [(1.0 / k_max, a)]))
                    outs.append((K2, 0, [(1.0 / k_max, 0.0), (-1.0 / k_max, a)]))
                user_out.append(outs)
            w_new = w_tail * C + s_new * nA + k
            for combo in itertools.product(*user_out):
                poly = base
                ki = qi = 0
                for K2, q2, p in combo:
                    poly = _poly_mul(poly, p)
                    ki = ki * k_max + (K2 - 1)
                    qi = qi * 2 + q2
                dest = (w_new * ch.num_k + ki) * ch.num_q + qi
                terms = merged.setdefault(dest, {})
                for c, e in poly:
                    # equal exponents may differ in the last bits depending on summation order
                    key = round(e, EXP_DIGITS)
                    e0, c0 = terms.get(key, (e, 0.0))
                    terms[key] = (e0, c0 + c)
        for dest, terms in merged.items():
            live = [(e, c) for e, c in terms.values() if abs(c) > COEF_TOL]
            if not live:
                continue
            for e, c in live:
                rows.append(idx)
                cols.append(dest)
                coefs.append(c)
                exps.append(e)
            e_row.append(idx)
            e_col.append(dest)
            e_res.append(min(e for e, _ in live))
            c0 = terms.get(0.0, (0.0, 0.0))[1]
            e_p0.append(c0 if abs(c0) > COEF_TOL else 0.0)
    ch.t_row = np.array(rows, dtype=np.int64)
    ch.t_col = np.array(cols, dtype=np.int64)
    ch.t_coef = np.array(coefs)
    ch.t_exp = np.array(exps)
    ch.row = np.array(e_row, dtype=np.int64)
    ch.col = np.array(e_col, dtype=np.int64)
    ch.resistance = np.array(e_res)
    ch.p0 = np.array(e_p0)
    return ch


# -- recurrent classes ---------------------------------------------------------

@dataclass
class RecurrentClass:
    """A closed communicating class of the unperturbed chain.

    ``kind`` is ``"B"`` (all content, repeating a configuration cycle) or
    ``"O"`` (all discontent). For ``B`` classes ``rates`` are the per-user
    window averages and ``value`` their summed utility.
    """

    kind: str
    states: np.ndarray
    label: str
    cycle: ConfigurationCycle | None = None
    K: tuple | None = None
    rates: np.ndarray | None = None
    value: float | None = None
    deficit: float | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "label": self.label, "num_states": int(len(self.states))}
        if self.kind == "B":
            d.update(cycle=[list(c) for c in self.cycle.configs], K=list(self.K), rates=self.rates.tolist(),
                     value=self.value, deficit=self.deficit)
        return d


def _closed_classes(n, row, col, mask):
    G = sp.csr_matrix((np.ones(int(mask.sum())), (row[mask], col[mask])), shape=(n, n))
    nc, lab = connected_components(G, directed=True, connection="strong")
    leaving = np.zeros(nc, dtype=bool)
    r, c = row[mask], col[mask]
    leaving[lab[r][lab[r] != lab[c]]] = True
    return [np.flatnonzero(lab == j) for j in range(nc) if not leaving[j]]


def recurrent_classes_zero(chain: Chain) -> list[RecurrentClass]:
    """Recurrent classes of the ``eps = 0`` chain, B classes first (sorted), O last."""
    if "classes" in chain._cache:
        return chain._cache["classes"]
    model, U = chain.model, chain.utility
    closed = _closed_classes(chain.size, chain.row, chain.col, chain.p0 > 0)
    qa = chain.q_array()
    out_b, out_o = [], []
    for states in closed:
        qs = qa[states]
        if (qs == 1).all():
            out_b.append(_content_class(chain, states))
        elif (qs == 0).all():
            out_o.append(states)
        else:
            s = int(states[0])
            raise AnalysisError(
                f"recurrent class of size {len(states)} mixes content and discontent users "
                f"(e.g. state {chain.decode(s)}); some users can change associations without affecting "
                "the others, so the model is not interdependent")
    if len(out_o) != 1:
        raise AnalysisError(f"expected one all-discontent class, found {len(out_o)}; check irreducibility")
    out_b.sort(key=lambda c: (c.cycle.configs, c.K))
    for j, c in enumerate(out_b):
        c.label = f"B{j + 1}"
    classes = out_b + [RecurrentClass("O", out_o[0], "O")]
    chain._cache["classes"] = classes
    return classes


def _content_class(chain: Chain, states) -> RecurrentClass:
    model, U = chain.model, chain.utility
    N = model.num_users
    succ = {}
    m = chain.p0 > 0
    for a, b in zip(chain.row[m], chain.col[m]):
        succ.setdefault(int(a), []).append(int(b))
    start = int(states[0])
    seq = []
    x = start
    while True:
        nxt = succ[x]
        if len(nxt) != 1:
            raise AnalysisError(f"content state {chain.decode(x)} has {len(nxt)} unperturbed successors")
        x = nxt[0]
        seq.append(chain.decode(x)[0][-1])
        if x == start:
            break
    if len(seq) != len(states):
        raise AnalysisError("content class is not a single deterministic orbit")
    _, K, _ = chain.decode(start)
    n = len(seq)
    rates = np.array([model.rates[s, k] for s, k in seq])
    pos = np.array([model.joint_positions[k] for _, k in seq])
    for i in range(N):
        for t in range(n):
            if pos[t, i] != pos[(t - K[i]) % n, i] or rates[t, i] != rates[(t - K[i]) % n, i]:
                raise AnalysisError(f"user {i} in content class does not repeat with period K_{i}={K[i]}")
    # smallest period of the configuration sequence
    period = next(p for p in range(1, n + 1) if n % p == 0 and all(seq[t] == seq[(t + p) % n] for t in range(n)))
    cyc = ConfigurationCycle(tuple(seq[:period]))
    win = np.array([rates[-K[i]:, i].mean() for i in range(N)])
    vals = U.values(win)
    return RecurrentClass("B", np.asarray(states), "", cyc, K, win, float(math.fsum(vals)),
                          float(math.fsum(1.0 - vals)))


# -- resistances and potentials ------------------------------------------------

def class_resistance(chain: Chain, X: RecurrentClass, Y: RecurrentClass) -> float:
    """Minimum path resistance from any state of ``X`` to any state of ``Y``."""
    if X is Y:
        return 0.0
    return float(resistance_matrix(chain)[_pos(chain, X), _pos(chain, Y)])


def _pos(chain, cls):
    for j, c in enumerate(recurrent_classes_zero(chain)):
        if c is cls or c.label == cls.label:
            return j
    raise DomainError(f"unknown class {cls.label}")


def resistance_matrix(chain: Chain) -> np.ndarray:
    """``rho[a, b]`` between recurrent classes in the order of :func:`recurrent_classes_zero`."""
    if "rho" in chain._cache:
        return chain._cache["rho"]
    classes = recurrent_classes_zero(chain)
    G = chain.resistance_graph()
    n = len(classes)
    rho = np.zeros((n, n))
    for a, X in enumerate(classes):
        dist = dijkstra(G, directed=True, indices=X.states, min_only=True)
        for b, Y in enumerate(classes):
            if a != b:
                d = float(dist[Y.states].min())
                if not np.isfinite(d):
                    raise AnalysisError(f"class {Y.label} is unreachable from {X.label}")
                rho[a, b] = d
    chain._cache["rho"] = rho
    return rho


def min_in_arborescence(W, root: int):
    """Minimum spanning in-tree into ``root`` of the complete digraph ``W`` (``W[a, b]`` = cost a->b).

    Uses Edmonds' optimal branching on the reversed graph. Returns
    ``(cost, parent)`` where ``parent[v]`` is the head of ``v``'s out-edge.
    """
    n = len(W)
    if n == 1:
        return 0.0, {}
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    for a in range(n):
        for b in range(n):
            if a != b and a != root:
                G.add_edge(b, a, weight=float(W[a, b]))
    T = nx.minimum_spanning_arborescence(G, attr="weight", preserve_attrs=True)
    parent = {a: b for b, a in T.edges()}
    return math.fsum(W[a, b] for a, b in parent.items()), parent


def exhaustive_in_arborescence(W, root: int):
    """Same as :func:`min_in_arborescence` by enumerating every parent map."""
    n = len(W)
    others = [v for v in range(n) if v != root]
    best, best_par = math.inf, None
    for heads in itertools.product(range(n), repeat=len(others)):
        par = dict(zip(others, heads))
        if any(a == b for a, b in par.items()):
            continue
        ok = True
        for v in others:
            seen = set()
            while v != root:
                if v in seen:
                    ok = False
                    break
                seen.add(v)
                v = par[v]
            if not ok:
                break
        if ok:
            cost = math.fsum(W[a, b] for a, b in par.items())
            if cost < best:
                best, best_par = cost, par
    return best, best_par


EXHAUSTIVE_LIMIT = 8


def stochastic_potentials(W, *, check: bool = True) -> np.ndarray:
    """Minimum in-tree cost into every vertex of the weighted digraph ``W``.

    With ``check`` and at most eight vertices the optimal-branching result
    is compared with exhaustive enumeration and must agree exactly.
    """
    W = np.asarray(W, dtype=float)
    n = len(W)
    gam = np.array([min_in_arborescence(W, r)[0] for r in range(n)])
    if check and n <= EXHAUSTIVE_LIMIT:
        ex = np.array([exhaustive_in_arborescence(W, r)[0] for r in range(n)])
        if not np.array_equal(gam, ex):
            raise AnalysisError(f"optimal branching {gam} disagrees with exhaustive enumeration {ex}")
    return gam


def class_potentials(chain: Chain) -> np.ndarray:
    if "gamma" not in chain._cache:
        chain._cache["gamma"] = stochastic_potentials(resistance_matrix(chain))
    return chain._cache["gamma"]


def stochastically_stable(chain: Chain, tol: float = TIE_TOL) -> list[RecurrentClass]:
    """Classes of minimum stochastic potential (ties all returned)."""
    gam = class_potentials(chain)
    classes = recurrent_classes_zero(chain)
    return [c for c, g in zip(classes, gam) if g <= gam.min() + tol]


def closed_form_potentials(chain: Chain) -> np.ndarray:
    """Closed-form potentials: ``z (L - 1) + D_i`` for content classes, ``L z`` for O."""
    classes = recurrent_classes_zero(chain)
    L = len(classes) - 1
    return np.array([math.fsum([chain.z] * (L - 1) + [c.deficit]) if c.kind == "B" else math.fsum([chain.z] * L)
                     for c in classes])


# -- stationary law ------------------------------------------------------------

def essential_states(chain: Chain) -> np.ndarray:
    """The unique closed class of the perturbed chain."""
    if "essential" not in chain._cache:
        closed = _closed_classes(chain.size, chain.row, chain.col, np.ones(len(chain.row), dtype=bool))
        if len(closed) != 1:
            raise AnalysisError(f"perturbed chain has {len(closed)} closed classes; expected one")
        chain._cache["essential"] = closed[0]
    return chain._cache["essential"]


def stationary_at(chain: Chain, eps: float, *, guard: int = SOLVE_GUARD, residual_tol: float = 1e-10) -> np.ndarray:
    """Exact stationary distribution at ``eps`` over the full state space.

    States with a window that breaks the transition map have no
    predecessors and get probability zero; every other state is positive.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    ess = essential_states(chain)
    if len(ess) > guard:
        raise CapabilityError(f"{len(ess)} essential states exceed the direct-solve guard {guard}")
    P = chain.matrix(eps)[ess][:, ess]
    n = len(ess)
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    pi_e = spsolve(A.tocsc(), b)
    resid = float(np.abs(P.T @ pi_e - pi_e).max())
    if resid > residual_tol or not np.isfinite(pi_e).all():
        raise AnalysisError(f"stationary solve residual {resid:.2e} exceeds {residual_tol:.0e}")
    if (pi_e <= 0).any():
        raise AnalysisError("stationary solve produced non-positive entries on the essential class")
    pi = np.zeros(chain.size)
    pi[ess] = pi_e
    return pi


def class_mass(chain: Chain, pi, classes=None) -> float:
    classes = recurrent_classes_zero(chain) if classes is None else classes
    return float(sum(pi[c.states].sum() for c in classes))


# -- empirical resistance --------------------------------------------------------

def first_passage_probability(chain: Chain, eps: float, sources, targets, horizon: int) -> float:
    """Probability of entering ``targets`` within ``horizon`` steps from a uniform start over ``sources``."""
    P = chain.matrix(eps).tolil()
    tgt = np.zeros(chain.size, dtype=bool)
    tgt[np.asarray(targets)] = True
    P = P.tocsr()
    absorbed = np.zeros(chain.size)
    x = np.zeros(chain.size)
    src = np.asarray(sources)
    x[src] = 1.0 / len(src)
    hit = 0.0
    keep = (~tgt).astype(float)
    for _ in range(horizon):
        x = P.T @ x
        hit += float(x[tgt].sum())
        x = x * keep
    return hit


def fit_exponent(eps_grid, probs) -> float:
    """Least-squares slope of ``log p`` against ``log eps``."""
    e = np.log(np.asarray(eps_grid, dtype=float))
    p = np.asarray(probs, dtype=float)
    if (p <= 0).any():
        raise AnalysisError("zero first-passage frequency; widen the horizon or raise the sample size")
    return float(np.polyfit(e, np.log(p), 1)[0])


def empirical_resistance(chain: Chain, X: RecurrentClass, Y: RecurrentClass, eps_grid, *, horizon: int = 20,
                         provider: str = "matrix", samples: int = 20_000, seed: int = 0,
                         max_horizon: int = 10_000) -> float:
    """Estimate ``rho(X -> Y)`` as the slope of first-passage probability in ``eps``.

    ``provider="matrix"`` iterates the exact matrix; ``"simulation"`` runs the
    agent simulator from a state of ``X`` and watches for a chain state of
    ``Y``. A zero count doubles the horizon until ``max_horizon``.
    """
    eps_grid = list(eps_grid)
    if len(eps_grid) < 3:
        raise DomainError("need at least three eps values")
    if X is Y or X.label == Y.label:
        return 0.0
    while True:
        if provider == "matrix":
            probs = [first_passage_probability(chain, e, X.states, Y.states, horizon) for e in eps_grid]
        elif provider == "simulation":
            probs = [_simulated_passage(chain, e, X, Y, horizon, samples, seed) for e in eps_grid]
        else:
            raise DomainError(f"unknown provider {provider!r}")
        if min(probs) > 0 or horizon >= max_horizon:
            return fit_exponent(eps_grid, probs)
        horizon *= 2


def _simulated_passage(chain: Chain, eps, X, Y, horizon, samples, seed) -> float:
    from .alg1 import Alg1Params, Alg1Start, run_alg1
    member = np.zeros(chain.size, dtype=bool)
    member[Y.states] = True
    rng = np.random.default_rng([seed, 7])
    hits = 0
    for r in range(samples):
        start = int(X.states[rng.integers(len(X.states))])
        window, K, q = chain.decode(start)
        params = Alg1Params(eps, chain.z, chain.k_max, seed=int(rng.integers(2 ** 62)), rate_tol=chain.rate_tol)
        res = run_alg1(chain.model, chain.utility, params, horizon, start=Alg1Start(window, K, q), trace=True,
                       record_every=horizon)
        idx = trace_states(chain, res.trace, window)
        hits += bool(member[idx[idx >= 0]].any())
    return hits / samples


def trace_states(chain: Chain, trace: dict, start_window=None) -> np.ndarray:
    """Chain index after every traced slot; ``-1`` where the window is not yet full."""
    model = chain.model
    nA, C = model.num_joint, chain.num_configs
    ks = np.array([model.joint_index(a) for a in trace["actions"]], dtype=np.int64)
    cfg = trace["state"] * nA + ks
    pre = np.array([s * nA + k for s, k in (start_window or [])], dtype=np.int64)
    cfg = np.concatenate([pre, cfg])
    T = len(trace["state"])
    t = np.arange(T) + len(pre)
    valid = t - chain.k_max + 1 >= 0
    w = np.zeros(T, dtype=np.int64)
    for j in range(chain.k_max):
        w = w * C + cfg[np.clip(t - chain.k_max + 1 + j, 0, None)]
    ki = np.zeros(T, dtype=np.int64)
    qi = np.zeros(T, dtype=np.int64)
    for i in range(model.num_users):
        ki = ki * chain.k_max + (trace["K"][:, i] - 1)
        qi = qi * 2 + trace["q"][:, i]
    idx = (w * chain.num_k + ki) * chain.num_q + qi
    return np.where(valid, idx, -1)


def analysis_report(chain: Chain, eps_values=()) -> dict:
    classes = recurrent_classes_zero(chain)
    rho = resistance_matrix(chain)
    gam = class_potentials(chain)
    stable = stochastically_stable(chain)
    rep = {"num_states": chain.size, "z": chain.z, "k_max": chain.k_max,
           "classes": [c.to_dict() for c in classes], "rho": rho.tolist(), "gamma": gam.tolist(),
           "gamma_closed_form": closed_form_potentials(chain).tolist(), "stable": [c.label for c in stable],
           "stationary": {}}
    for e in eps_values:
        pi = stationary_at(chain, e)
        rep["stationary"][str(e)] = {"stable_mass": class_mass(chain, pi, stable),
                                     "class_mass": {c.label: float(pi[c.states].sum()) for c in classes}}
    return rep
