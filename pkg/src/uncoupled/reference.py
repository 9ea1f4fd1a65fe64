"""Centralized baselines: projected subgradient ascent and exact grid optima."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cycles import (enumerate_basic_cycles, cycle_rates, solve_action_grid_program, solve_control_grid_program,
                     solve_cycle_program, solve_state_grid_program)
from .errors import ContractError, DomainError
from .model import ControlledMarkov, ExogenousErgodic, IidPerAction, NetworkModel, expected_rates
from .results import write_curve
from .utility import UtilityProfile

BASELINE_VARIANTS = ("cycles", "iid-action", "per-state", "controls")


@dataclass(frozen=True)
class SubgradientConfig:
    step: str = "harmonic"  # "constant" or "harmonic" (step_size / sqrt(t))
    step_size: float = 0.5
    iterations: int = 2000
    tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.step not in ("constant", "harmonic"):
            raise DomainError(f"unknown step rule {self.step!r}")
        if self.iterations < 1 or not self.step_size > 0:
            raise DomainError("iterations and step_size must be positive")


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - (css - 1.0) / k > 0)[-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    p = np.maximum(v - theta, 0.0)
    return p / p.sum()


@dataclass
class BaselineResult:
    variant: str
    values: np.ndarray  # utility of the iterate, index 0 = uniform start
    best_value: float
    best_point: list
    best_rates: np.ndarray

    def to_csv(self, path) -> None:
        write_curve(path, np.arange(len(self.values)), np.maximum.accumulate(self.values))


def _blocks(model: NetworkModel, variant: str, cycles=None):
    """Per-block rate matrices ``V_b`` with ``r = sum_b V_b^T p_b``."""
    ev = model.evolution
    if variant == "cycles":
        if not model.is_deterministic:
            raise ContractError(f"variant 'cycles' needs deterministic evolution, model has {ev.kind}")
        cycles = enumerate_basic_cycles(model) if cycles is None else list(cycles)
        return [cycle_rates(model, cycles)], cycles
    if variant == "iid-action":
        if not isinstance(ev, IidPerAction):
            raise ContractError(f"variant 'iid-action' needs i.i.d. evolution, model has {ev.kind}")
        return [expected_rates(model)], None
    if variant == "per-state":
        from .known_state import _transition
        from .markov import stationary_distribution
        mu = stationary_distribution(_transition(model))
        return [mu[s] * model.rates[s] for s in range(model.num_states)], None
    if variant == "controls":
        if not isinstance(ev, ControlledMarkov):
            raise ContractError(f"variant 'controls' needs controlled-Markov evolution, model has {ev.kind}")
        from .frame import all_joint_controls, expected_payoff_control
        H = all_joint_controls(model)
        return [np.array([expected_payoff_control(model, h) for h in H])], H
    raise DomainError(f"unknown variant {variant!r}; expected one of {BASELINE_VARIANTS}")


def subgradient_baseline(model: NetworkModel, utility: UtilityProfile, variant: str,
                         config: SubgradientConfig = SubgradientConfig(), *, cycles=None,
                         seeds=()) -> BaselineResult:
    """Projected (super)gradient ascent on ``sum_i U_i(r(p))`` from the uniform point.

    ``seeds`` are extra points (lists of per-block weight vectors) whose
    values initialize the best-so-far record. Non-smooth utilities use their
    left derivative.
    """
    blocks, _ = _blocks(model, variant, cycles)
    return ascend(blocks, utility, config, seeds=seeds, variant=variant)


def ascend(blocks, utility: UtilityProfile, config: SubgradientConfig = SubgradientConfig(), *, seeds=(),
           variant: str = "custom") -> BaselineResult:
    blocks = [np.asarray(B, dtype=float) for B in blocks]
    p = [np.full(len(B), 1.0 / len(B)) for B in blocks]

    def rates(q):
        return sum(B.T @ x for B, x in zip(blocks, q))

    best_val, best_p = -np.inf, None
    for q in seeds:
        v = float(utility.total(rates(q)))
        if v > best_val:
            best_val, best_p = v, [np.asarray(x, dtype=float) for x in q]
    values = np.empty(config.iterations + 1)
    for t in range(config.iterations + 1):
        r = rates(p)
        v = float(utility.total(r))
        values[t] = v
        if v > best_val:
            best_val, best_p = v, [x.copy() for x in p]
        if t == config.iterations:
            break
        g = utility.gradient(r)
        eta = config.step_size if config.step == "constant" else config.step_size / np.sqrt(t + 1)
        new = [project_simplex(x + eta * (B @ g)) for B, x in zip(blocks, p)]
        if max(np.abs(a - b).max() for a, b in zip(new, p)) <= config.tol:
            values = values[: t + 1]
            break
        p = new
    return BaselineResult(variant, values, best_val, best_p, rates(best_p))


def exhaustive_optimum(model: NetworkModel, utility: UtilityProfile, variant: str, K: int, *, cycles=None):
    """Exact grid optimum for ``variant``, delegated to the grid solvers."""
    if variant == "cycles":
        return solve_cycle_program(model, utility, K, cycles=cycles)
    if variant == "iid-action":
        return solve_action_grid_program(model, utility, K)
    if variant == "per-state":
        return solve_state_grid_program(model, utility, K)
    if variant == "controls":
        return solve_control_grid_program(model, utility, K)
    raise DomainError(f"unknown variant {variant!r}; expected one of {BASELINE_VARIANTS}")
