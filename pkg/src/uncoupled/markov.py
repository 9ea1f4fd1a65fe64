"""Small dense Markov-chain helpers: ergodicity checks, stationary laws, SLEM."""
from __future__ import annotations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DomainError

ROW_TOL = 1e-12


def check_stochastic(P, tol: float = ROW_TOL) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {P.shape}")
    if (P < 0).any():
        raise DomainError("transition matrix has negative entries")
    bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise DomainError(f"row {bad[0]} sums to {P[bad[0]].sum()!r}, not 1")
    return P


def is_irreducible(P) -> bool:
    n, _ = connected_components(np.asarray(P) > 0, directed=True, connection="strong")
    return n == 1


def is_aperiodic(P) -> bool:
    """Primitive-matrix test by Wielandt's bound ``(n - 1)**2 + 1``."""
    A = (np.asarray(P) > 0).astype(np.int64)
    n = A.shape[0]
    M = A.copy()
    k = 1
    target = (n - 1) ** 2 + 1
    while k < target:
        M = np.minimum(M @ A, 1)
        k += 1
        if M.all():
            return True
    return bool(M.all())


def is_ergodic(P) -> bool:
    return is_irreducible(P) and is_aperiodic(P)


def solve_stationary(P) -> np.ndarray:
    """Solve ``pi P = pi, sum(pi) = 1`` by a direct linear solve.

    The caller is responsible for irreducibility; a reducible chain makes the
    system singular.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    return pi


def stationary_distribution(P, *, residual_tol: float = 1e-10) -> np.ndarray:
    """Stationary pmf of an irreducible aperiodic stochastic matrix."""
    P = check_stochastic(P)
    if not is_irreducible(P):
        raise DomainError("induced chain is reducible; no unique stationary distribution")
    if not is_aperiodic(P):
        raise DomainError("induced chain is periodic")
    pi = solve_stationary(P)
    resid = np.max(np.abs(pi @ P - pi))
    if resid > residual_tol or abs(pi.sum() - 1.0) > residual_tol:
        raise DomainError(f"stationary solve residual {resid:.3e} exceeds {residual_tol:.0e}")
    return pi


def power_iteration(P, tol: float = 1e-14, max_iter: int = 1_000_000) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    return pi


def slem(P) -> float:
    """Second largest eigenvalue modulus of a stochastic matrix."""
    P = check_stochastic(P)
    mods = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    if mods.size < 2:
        return 0.0
    return float(mods[1])
