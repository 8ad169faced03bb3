"""Backend benchmark: numba-compiled kernels vs the pure-numpy fallback.

Each timed block exercises one hot kernel at production problem sizes.  The
script re-executes itself in a subprocess per backend (the flag is read at
import time) and prints a side-by-side table:

    python -m helixguard.benchmark
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench_current_backend(repeats: int) -> dict:
    from . import _backend, _kernels
    from .model import GtmrParams
    from .ocp import build_ocp
    from .sim import default_scenario, initial_state
    from .solver import RtiSolver

    sc = default_scenario()
    params = sc.params
    par, Z, TQ = params.pack()
    n = sc.nmpc.horizon
    dt = sc.nmpc.sampling_time

    x0 = initial_state(sc)
    us = 0.5 * np.sin(np.arange(n * 6, dtype=float)).reshape(n, 6)
    xs = _kernels.rollout(x0, us, np.zeros(9), np.zeros(3), dt, par, Z, TQ,
                          False)
    solver = RtiSolver()
    warm = solver.initial_solution(x0, n)
    problem = build_ocp("robust", x0, 0.0, np.full(n + 1, 0.05),
                        config=sc.nmpc, geometry=sc.geometry, helix=sc.helix,
                        params=params)

    def timed(fn, reps):
        fn()  # warm-up / JIT
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - t0) / reps * 1e3

    out = {"backend": _backend.backend_name()}
    out["rk4_step"] = timed(
        lambda: _kernels.rk4_step(x0, us[0], np.zeros(9), np.zeros(3), dt,
                                  par, Z, TQ, True), repeats * 20)
    out["sensitivity_horizon"] = timed(
        lambda: _kernels.propagate_sensitivity(xs, us, dt, par, Z, TQ),
        repeats)
    out["linearize_horizon"] = timed(
        lambda: _kernels.linearize_horizon(xs, us, dt, par, Z, TQ), repeats)
    out["rti_step"] = timed(lambda: solver.rti_step(problem, warm), repeats)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "--worker":
        repeats = int(argv[1])
        print(json.dumps(_bench_current_backend(repeats)))
        return 0

    repeats = int(argv[0]) if argv else 30
    rows = {}
    for flag, name in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, HELIXGUARD_NUMBA=flag)
        reps = repeats if flag == "1" else max(2, repeats // 10)
        proc = subprocess.run(
            [sys.executable, "-m", "helixguard.benchmark", "--worker",
             str(reps)],
            env=env, capture_output=True, text=True, check=True)
        rows[name] = json.loads(proc.stdout.splitlines()[-1])

    kernels = [k for k in rows["numba"] if k != "backend"]
    print(f"{'kernel':<22} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>9}")
    for k in kernels:
        a, b = rows["numba"][k], rows["numpy"][k]
        print(f"{k:<22} {a:>12.3f} {b:>12.3f} {b / a:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
