"""Experiment specs, sweeps over eps and seeded replications."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .model import load_scenario, model_from_dict
from .results import write_curve
from .utility import NormalizedLog, UtilityProfile

ALGORITHMS = ("alg1", "alg2-iid", "alg2-markov", "alg3")
BUILTIN = {
    "wifi": ("deterministic",),
    "wifi-deterministic": ("deterministic",),
    "wifi-iid": ("iid",),
    "wifi-exogenous": ("exogenous",),
    "wifi-markov": ("markov",),
}
EVOLUTION_FOR = {"alg1": "deterministic", "alg2-iid": "iid", "alg2-markov": "markov", "alg3": "exogenous"}


def resolve_scenario(ref, algorithm: str | None = None):
    """Scenario from a file path, an inline document or a built-in name.

    Built-ins: ``wifi`` (evolution picked to suit ``algorithm``),
    ``wifi-<evolution>`` and ``standard``.
    """
    if isinstance(ref, dict):
        return model_from_dict(ref)
    if ref == "standard":
        from .instances import default_utility, standard_instance
        m = standard_instance()
        return m, default_utility(m.num_users)
    if ref in BUILTIN:
        from .wifi import paper_scenario
        ev = BUILTIN[ref][0]
        if ref == "wifi" and algorithm is not None:
            ev = EVOLUTION_FOR[algorithm]
        m = paper_scenario(ev)
        return m, UtilityProfile.uniform(NormalizedLog(), m.num_users)
    return load_scenario(ref)


@dataclass
class ExperimentSpec:
    scenario: object = "wifi"
    algorithm: str = "alg1"
    eps: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3])
    k: int = 2  # k_max for alg1, history depth K otherwise
    z: float | None = None  # default: number of users + 1
    frame_len: int | None = 4000
    delta: object = 0.05  # number or "auto"
    horizon: int = 1_000_000  # slots for alg1/alg3, frames for alg2
    reps: int = 10
    seed: int = 0
    out: str = "out"
    record_every: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.eps:
            raise DomainError("eps grid is empty")
        if self.reps < 1 or self.horizon < 1 or self.k < 1:
            raise DomainError("reps, horizon and k must be positive")
        if self.algorithm == "alg1" and self.horizon <= self.k:
            raise DomainError("horizon must exceed the warm-up of k_max slots")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown experiment keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def replication_seed(base: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, rep]).generate_state(1, dtype=np.uint64)[0] >> 1)


def eps_tag(eps: float) -> str:
    return f"{eps:g}"


def run_one(spec: ExperimentSpec, eps: float, rep: int, model=None, utility=None):
    """One replication at one ``eps``; returns a :class:`RunResult`."""
    if model is None:
        model, utility = resolve_scenario(spec.scenario, spec.algorithm)
    if utility is None:
        utility = UtilityProfile.uniform(NormalizedLog(), model.num_users)
    z = spec.z if spec.z is not None else model.num_users + 1
    seed = replication_seed(spec.seed, rep)
    if spec.algorithm == "alg1":
        from .alg1 import Alg1Params, run_alg1
        return run_alg1(model, utility, Alg1Params(eps, z, spec.k, seed=seed), spec.horizon,
                        record_every=spec.record_every)
    if spec.algorithm == "alg3":
        from .known_state import KnownStateParams, run_alg3
        return run_alg3(model, utility, KnownStateParams(eps, z, spec.k, seed=seed), spec.horizon,
                        record_every=spec.record_every)
    from .frame import FrameParams, choose_frame_params_iid, choose_frame_params_markov, control_slems, run_frame
    variant = spec.algorithm.split("-")[1]
    if spec.delta == "auto":
        if variant == "iid":
            L, delta = choose_frame_params_iid(eps, z)
        else:
            L, delta = choose_frame_params_markov(eps, z, float(control_slems(model).max()))
        if spec.frame_len is not None:
            L = spec.frame_len
    else:
        L, delta = spec.frame_len, float(spec.delta)
        if L is None:
            raise DomainError("frame_len is required unless delta is 'auto'")
    return run_frame(model, utility, FrameParams(eps, z, spec.k, L, delta, seed=seed), spec.horizon,
                     variant=variant, record_every=spec.record_every)


def _task(args):
    spec, eps, rep = args
    res = run_one(spec, eps, rep)
    return eps, rep, res.slots, res.sum_utility, res.final_window_mean(), res.final_rates


def run_experiment(spec: ExperimentSpec, *, write: bool = True) -> dict:
    """Run every ``(eps, replication)`` pair; write per-run and mean CSVs plus ``summary.json``."""
    tasks = [(spec, e, r) for e in spec.eps for r in range(spec.reps)]
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as ex:
            results = list(ex.map(_task, tasks))
    else:
        model, utility = resolve_scenario(spec.scenario, spec.algorithm)
        results = []
        for s, e, r in tasks:
            res = run_one(s, e, r, model, utility)
            results.append((e, r, res.slots, res.sum_utility, res.final_window_mean(), res.final_rates))
    results.sort(key=lambda x: (spec.eps.index(x[0]), x[1]))
    out = Path(spec.out)
    summary = {"algorithm": spec.algorithm, "spec": _spec_dict(spec), "eps": {}}
    for e in spec.eps:
        rows = [x for x in results if x[0] == e]
        finals = np.array([x[4] for x in rows])
        curves = np.array([x[3] for x in rows])
        slots = rows[0][2]
        if write:
            for _, r, sl, su, _, _ in rows:
                write_curve(out / f"{spec.algorithm}_eps{eps_tag(e)}_rep{r}.csv", sl, su)
            write_curve(out / f"{spec.algorithm}_eps{eps_tag(e)}_mean.csv", slots, curves.mean(axis=0))
        summary["eps"][eps_tag(e)] = {
            "final_window_mean": float(finals.mean()),
            "stderr": float(finals.std(ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else 0.0,
            "per_rep": finals.tolist(),
            "final_rates_mean": np.mean([x[5] for x in rows], axis=0).tolist(),
        }
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _spec_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    if not isinstance(d["scenario"], (str, dict)):
        d["scenario"] = str(d["scenario"])
    return d


def monotone_verdict(eps, means, stderrs) -> dict:
    """Non-increasing in ``eps`` allowing one inversion within one standard error."""
    order = np.argsort(eps)
    m = np.asarray(means)[order]
    se = np.asarray(stderrs)[order]
    inversions = [(float(np.asarray(eps)[order][j]), float(np.asarray(eps)[order][j + 1]))
                  for j in range(len(m) - 1) if m[j + 1] > m[j]]
    small = all(m[j + 1] - m[j] <= max(se[j], se[j + 1])
                for j in range(len(m) - 1) if m[j + 1] > m[j])
    return {"inversions": inversions, "monotone": len(inversions) == 0 or (len(inversions) == 1 and small)}


ORACLE_VARIANT = {"alg1": "cycles", "alg2-iid": "iid-action", "alg2-markov": "controls", "alg3": "per-state"}


def oracle_for(spec: ExperimentSpec, model, utility, grid: int | None = None):
    """Grid oracle matching the algorithm; cycles are limited to length ``k_max``."""
    from .reference import exhaustive_optimum
    K = grid or spec.k
    variant = ORACLE_VARIANT[spec.algorithm]
    cycles = None
    if variant == "cycles":
        from .cycles import enumerate_short_cycles
        cycles = enumerate_short_cycles(model, spec.k)
    return exhaustive_optimum(model, utility, variant, K, cycles=cycles), cycles


def compare(spec: ExperimentSpec, summary: dict | None = None, *, baseline_iterations: int = 2000) -> dict:
    """Join run summaries with the grid oracle and the subgradient baseline."""
    from .reference import SubgradientConfig, subgradient_baseline
    if summary is None:
        path = Path(spec.out) / "summary.json"
        summary = json.loads(path.read_text()) if path.exists() else run_experiment(spec)
    model, utility = resolve_scenario(spec.scenario, spec.algorithm)
    sol, cycles = oracle_for(spec, model, utility)
    base = subgradient_baseline(model, utility, ORACLE_VARIANT[spec.algorithm],
                                SubgradientConfig(iterations=baseline_iterations), cycles=cycles)
    eps = [float(e) for e in summary["eps"]]
    means = [v["final_window_mean"] for v in summary["eps"].values()]
    ses = [v["stderr"] for v in summary["eps"].values()]
    rep = {"algorithm": spec.algorithm, "oracle": sol.value, "oracle_grid": sol.grid,
           "baseline": base.best_value, "per_eps": {}, "monotonicity": monotone_verdict(eps, means, ses)}
    for e, m, s in zip(summary["eps"], means, ses):
        rep["per_eps"][e] = {"final_window_mean": m, "stderr": s, "gap_to_oracle": sol.value - m,
                             "relative_gap": (sol.value - m) / abs(sol.value)}
    return rep
