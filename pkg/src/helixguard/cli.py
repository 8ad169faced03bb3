"""Command-line interface: simulate | montecarlo | check | reference."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .geometry import helix_reference, tower_distance
from .model import GimbalLockError, UncertaintyVector, sample_uncertainty
from .sim import (GustProcess, TrialResult, _gust_seed, monte_carlo,
                  run_closed_loop, warm_up)
from .solver import SolverError
from . import selfcheck

TRACE_HEADER = "t,px,py,pz,dT,s,alpha_p0,alpha_gN,solve_ms,slack_max"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.defaults()
    return RunConfig.load(path)


def write_trace_csv(path, trial: TrialResult):
    tr = trial.trace
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for k in range(tr.t.size):
            row = (tr.t[k], tr.position[k, 0], tr.position[k, 1],
                   tr.position[k, 2], tr.clearance[k], tr.residual[k],
                   tr.alpha_p0[k], tr.alpha_gN[k], tr.solve_ms[k],
                   tr.slack_max[k])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _parse_zeta(text: str, config: RunConfig, seed: int) -> UncertaintyVector:
    if text is None:
        return UncertaintyVector.zero()
    if text.strip().lower() == "random":
        return sample_uncertainty(config.scenario().bounds, seed)
    parts = [float(v) for v in text.replace(",", " ").split()]
    if len(parts) != 9:
        raise ConfigError("--zeta needs 9 values or 'random'")
    return UncertaintyVector.from_vector(parts)


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    scenario = config.scenario()
    zeta = _parse_zeta(args.zeta, config, args.seed)
    gust = GustProcess(correlation_time=scenario.gust.correlation_time,
                       bound=scenario.gust.bound,
                       rng_seed=_gust_seed(args.seed))
    warm_up(scenario)
    trial = run_closed_loop(args.controller, zeta, gust, scenario)
    write_trace_csv(args.output, trial)
    if not trial.completed:
        print(f"trial aborted: {trial.abort_reason}")
        return EXIT_NUMERIC
    print(f"controller: {args.controller}")
    print(f"min clearance: {trial.min_clearance:.4f} m")
    print(f"violated: {'yes' if trial.violated else 'no'}")
    print(f"trace written to {args.output}")
    return EXIT_VIOLATION if trial.violated else EXIT_OK


def cmd_montecarlo(args) -> int:
    config = _load_config(args.config)
    scenario = config.scenario()
    n_trials = args.trials or config.get("campaign", "n_trials")
    seed = args.seed if args.seed is not None else config.get("campaign",
                                                              "base_seed")
    outdir = Path(args.output_dir or config.get("campaign", "output_dir"))
    outdir.mkdir(parents=True, exist_ok=True)

    def stream(i, nom, rob):
        write_trace_csv(outdir / f"trial_{i:04d}_nominal.csv", nom)
        write_trace_csv(outdir / f"trial_{i:04d}_robust.csv", rob)

    nom, rob = monte_carlo(n_trials, seed, scenario, trial_callback=stream)

    summary = {
        "schema_version": 1,
        "trials": n_trials,
        "base_seed": int(seed),
        "controllers": {
            "nominal": dict(controller="nominal", **nom.to_dict()),
            "robust": dict(controller="robust", **rob.to_dict()),
        },
    }
    with open(outdir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"{'Controller':<12} {'Min. clearance':>15} "
          f"{'Trials with violation':>22} {'Avg. solve time':>16}")
    for name, s in (("nominal", nom), ("robust", rob)):
        print(f"{name:<12} {s.min_clearance_overall:>13.3f} m "
              f"{s.violations:>12d}/{s.n_trials:<8d} "
              f"{s.solve_time_mean * 1e3:>13.1f} ms")
    print(f"results in {outdir}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = selfcheck.run_all(verbose=True)
    return EXIT_OK if all(r.passed for r in results) else 1


def cmd_reference(args) -> int:
    config = _load_config(args.config)
    scenario = config.scenario()
    dt = args.dt
    t_end = args.t_final if args.t_final is not None else scenario.t_sim
    out = open(args.output, "w", encoding="utf-8", newline="\n") \
        if args.output else sys.stdout
    try:
        out.write("t,px,py,pz,vx,vy,vz,ax,ay,az\n")
        n = int(round(t_end / dt))
        for k in range(n + 1):
            t = k * dt
            ref = helix_reference(t, scenario.helix)
            row = (t, *ref.position, *ref.velocity, *ref.acceleration)
            out.write(",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if args.output:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="helixguard",
        description="Robust vs nominal NMPC for helical tower inspection")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one closed-loop trial")
    sim.add_argument("--config", type=Path, default=None)
    sim.add_argument("--controller", choices=("nominal", "robust"),
                     default="robust")
    sim.add_argument("--zeta", default=None,
                     help="9 comma-separated values or 'random' (default: zero)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--output", type=Path, default=Path("trace.csv"))
    sim.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("montecarlo", help="paired nominal/robust campaign")
    mc.add_argument("--config", type=Path, default=None)
    mc.add_argument("--trials", type=int, default=None)
    mc.add_argument("--seed", type=int, default=None)
    mc.add_argument("--output-dir", type=Path, default=None)
    mc.set_defaults(func=cmd_montecarlo)

    chk = sub.add_parser("check", help="run the numeric oracle suites")
    chk.set_defaults(func=cmd_check)

    ref = sub.add_parser("reference", help="dump the helix reference as CSV")
    ref.add_argument("--config", type=Path, default=None)
    ref.add_argument("--dt", type=float, default=0.025)
    ref.add_argument("--t-final", type=float, default=None)
    ref.add_argument("--output", type=Path, default=None)
    ref.set_defaults(func=cmd_reference)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GimbalLockError, SolverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
