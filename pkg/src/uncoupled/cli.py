"""Command line entry point: ``uncoupled {validate,run,analyze,oracle,compare}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import AnalysisError, CapabilityError, ContractError, DomainError
from .experiment import ExperimentSpec, compare, resolve_scenario, run_experiment


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    print(text)


def cmd_validate(args) -> int:
    from .model import ExogenousErgodic, IidPerAction, check_interdependence, check_irreducibility
    model, _ = resolve_scenario(args.scenario)
    report = {"scenario": model.name, "evolution": model.evolution.kind, "ok": True}
    if model.is_deterministic:
        ok, wit = check_irreducibility(model)
        report["irreducible"] = ok
        if not ok:
            report["ok"] = False
            report["irreducibility_witness"] = {"from": wit[0], "unreachable": wit[1]}
    expected = isinstance(model.evolution, IidPerAction)
    ok, wit = check_interdependence(model, expected=expected)
    report["interdependent"] = ok
    if not ok:
        report["ok"] = False
        report["interdependence_witness"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in wit.items()}
    if isinstance(model.evolution, ExogenousErgodic):
        report["stationary"] = model.evolution.stationary.tolist()
    _emit(report, None)
    return 0 if report["ok"] else 1


def _spec_from_args(args) -> ExperimentSpec:
    d = json.loads(Path(args.experiment).read_text()) if args.experiment else {}
    for key, attr in (("scenario", "scenario"), ("algorithm", "alg"), ("eps", "eps"), ("k", "kmax"),
                      ("frame_len", "frame_len"), ("delta", "delta"), ("horizon", "horizon"), ("reps", "reps"),
                      ("seed", "seed"), ("out", "out"), ("z", "z"), ("jobs", "jobs"),
                      ("record_every", "record_every")):
        v = getattr(args, attr, None)
        if v is not None:
            d[key] = v
    if isinstance(d.get("delta"), str) and d["delta"] != "auto":
        d["delta"] = float(d["delta"])
    return ExperimentSpec.from_dict(d)


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    summary = run_experiment(spec)
    for e, v in summary["eps"].items():
        print(f"{spec.algorithm} eps={e}: final-window mean {v['final_window_mean']:.6f} "
              f"(se {v['stderr']:.6f}, {spec.reps} reps)")
    print(f"wrote {spec.out}/")
    return 0


def cmd_analyze(args) -> int:
    from .chain import analysis_report, build_chain
    model, utility = resolve_scenario(args.scenario)
    z = args.z if args.z is not None else model.num_users + 1
    chain = build_chain(model, utility, z, args.kmax)
    _emit(analysis_report(chain, args.eps or ()), args.out)
    return 0


def cmd_oracle(args) -> int:
    from .cycles import enumerate_short_cycles
    from .reference import exhaustive_optimum
    model, utility = resolve_scenario(args.scenario)
    cycles = enumerate_short_cycles(model, args.max_length) if args.variant == "cycles" and args.max_length else None
    sol = exhaustive_optimum(model, utility, args.variant, args.grid, cycles=cycles)
    _emit(sol.to_dict(), args.out)
    return 0


def cmd_compare(args) -> int:
    spec = _spec_from_args(args)
    rep = compare(spec)
    _emit(rep, str(Path(spec.out) / "compare.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uncoupled", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check the structural assumptions of a scenario")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    def experiment_flags(q):
        q.add_argument("experiment", nargs="?", help="experiment JSON (flags override its fields)")
        q.add_argument("--scenario")
        q.add_argument("--alg", choices=["alg1", "alg2-iid", "alg2-markov", "alg3"])
        q.add_argument("--eps", type=float, nargs="+")
        q.add_argument("--kmax", "-K", type=int)
        q.add_argument("--z", type=float)
        q.add_argument("--frame-len", type=int)
        q.add_argument("--delta", help="tolerance or 'auto'")
        q.add_argument("--horizon", type=int)
        q.add_argument("--reps", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--out")
        q.add_argument("--jobs", type=int)
        q.add_argument("--record-every", type=int)

    r = sub.add_parser("run", help="run an eps sweep with replications")
    experiment_flags(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare run output with the grid oracle and the baseline")
    experiment_flags(c)
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("analyze", help="exact perturbed-chain report")
    a.add_argument("scenario")
    a.add_argument("--kmax", "-K", type=int, default=2)
    a.add_argument("--z", type=float)
    a.add_argument("--eps", type=float, nargs="*")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("oracle", help="certified grid optimum")
    o.add_argument("scenario")
    o.add_argument("--variant", choices=["cycles", "iid-action", "per-state", "controls"], default="cycles")
    o.add_argument("--grid", "-K", type=int, default=2)
    o.add_argument("--max-length", type=int, help="only cycles up to this length (large models)")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}", file=sys.stderr)
        return 2
    except (DomainError, ContractError, CapabilityError, AnalysisError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
