"""Closed-loop simulation and Monte-Carlo robustness evaluation.

The true plant integrates the perturbed dynamics (sampled mismatch, bounded
gust force scaled by the true mass) with the same fixed RK4 step as the
controller's prediction model, so that the only plant/controller discrepancy
is the mismatch itself.  Campaigns run both controllers against identical
realizations (paired comparison), one seed stream per trial.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .geometry import HelixSpec, TowerGeometry, helix_reference, reference_yaw
from .model import (GimbalLockError, GtmrParams, UncertaintyBounds,
                    UncertaintyVector, sample_uncertainty)
from .ocp import NmpcConfig, build_ocp
from .solver import RtiSolver, SolverError
from .tighten import TighteningConfig
from .integrate import propagate_horizon_sensitivity


@dataclass(frozen=True)
class GustProcess:
    """Bounded fast-varying gust force: per-axis Ornstein-Uhlenbeck with
    stationary std bound/3, hard norm-clipped to the bound."""

    correlation_time: float = 0.05
    bound: float = 0.6
    rng_seed: int = 0

    def __post_init__(self):
        if self.correlation_time <= 0:
            raise ValueError("correlation time must be positive")
        if self.bound < 0:
            raise ValueError("gust bound must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    """Everything one closed-loop trial needs besides the realization."""

    params: GtmrParams = field(default_factory=GtmrParams)
    geometry: TowerGeometry = field(default_factory=TowerGeometry)
    helix: HelixSpec = field(default_factory=HelixSpec)
    nmpc: NmpcConfig = field(default_factory=NmpcConfig)
    bounds: UncertaintyBounds = field(default_factory=UncertaintyBounds)
    tightening: TighteningConfig = field(default_factory=TighteningConfig)
    gust: GustProcess = field(default_factory=GustProcess)
    t_sim: float = 50.0


def default_scenario(**kw) -> Scenario:
    return Scenario(**kw)


def synthesize_gust(process: GustProcess, t_grid) -> np.ndarray:
    """Realize the gust force on a monotone time grid, (len(t_grid), 3)."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or (t.size > 1 and np.any(np.diff(t) <= 0)):
        raise ValueError("time grid must be strictly increasing")
    rng = np.random.default_rng(process.rng_seed)
    sigma = process.bound / 3.0
    n = t.size
    w = np.empty((n, 3))
    w[0] = sigma * rng.standard_normal(3)
    for k in range(1, n):
        dt = t[k] - t[k - 1]
        a = math.exp(-dt / process.correlation_time)
        s = sigma * math.sqrt(max(0.0, 1.0 - a * a))
        w[k] = a * w[k - 1] + s * rng.standard_normal(3)
    norms = np.linalg.norm(w, axis=1)
    over = norms > process.bound
    if np.any(over):
        w[over] *= (process.bound / norms[over])[:, None]
    return w


@dataclass
class Trace:
    """Per-instant closed-loop record at the controller sampling grid."""

    t: np.ndarray
    position: np.ndarray
    clearance: np.ndarray
    residual: np.ndarray
    alpha_p0: np.ndarray
    alpha_gN: np.ndarray
    solve_ms: np.ndarray
    slack_max: np.ndarray

    def truncate(self, k: int) -> "Trace":
        return Trace(*(getattr(self, f)[:k] for f in (
            "t", "position", "clearance", "residual", "alpha_p0",
            "alpha_gN", "solve_ms", "slack_max")))


@dataclass
class TrialResult:
    """One closed-loop run: realization, safety outcome and timing.

    avg_solve_time covers the full per-step controller computation
    (sensitivity propagation and margins for the robust variant, problem
    assembly, and the SQP iteration).
    """

    zeta: UncertaintyVector
    min_clearance: float
    violated: bool
    max_residual: float
    tracking_rmse: float
    avg_solve_time: float
    trace: Trace
    controller: str = ""
    completed: bool = True
    abort_reason: str = ""


@dataclass
class McSummary:
    """Aggregate campaign statistics for one controller."""

    n_trials: int
    violations: int
    min_clearance_overall: float
    residual_quartiles: tuple      # 5-number summary of pooled residuals [m]
    solve_time_mean: float

    def to_dict(self) -> dict:
        return {
            "trials": self.n_trials,
            "violations": self.violations,
            "min_clearance": self.min_clearance_overall,
            "residual_quartiles": list(self.residual_quartiles),
            "solve_time_mean_ms": self.solve_time_mean * 1e3,
        }


def initial_state(scenario: Scenario) -> np.ndarray:
    """On the helix at t=0, tower-facing yaw, zero rates, hover speeds."""
    ref = helix_reference(0.0, scenario.helix)
    x = np.zeros(18)
    x[0:3] = ref.position
    x[5] = reference_yaw(0.0, scenario.helix)
    x[6:9] = ref.velocity
    x[12:18] = scenario.params.hover_speed()
    return x


def _gust_seed(zeta_seed: int) -> int:
    """Independent gust stream derived from the trial seed."""
    return int(np.random.SeedSequence([zeta_seed, 1]).generate_state(1)[0])


def run_closed_loop(controller: str, zeta_true: UncertaintyVector,
                    gust: GustProcess, scenario: Scenario) -> TrialResult:
    """Simulate the perturbed plant under one controller for t_sim seconds."""
    if controller not in ("nominal", "robust"):
        raise ValueError("controller must be 'nominal' or 'robust'")
    cfg = scenario.nmpc
    geom = scenario.geometry
    tcfg = scenario.tightening
    n = cfg.horizon
    dt = cfg.sampling_time
    n_steps = int(round(scenario.t_sim / dt))

    par, Z, TQ = scenario.params.pack()
    zeta_vec = zeta_true.flatten()
    w_upper = scenario.bounds.upper
    gusts = synthesize_gust(gust, np.arange(n_steps) * dt) if n_steps else \
        np.zeros((0, 3))

    alpha_g = np.array([0.5 * (tcfg.gust_bound / tcfg.mass_min)
                        * (i * dt) ** 2 for i in range(n + 1)])

    x = initial_state(scenario)
    solver = RtiSolver()
    warm = solver.initial_solution(x, n)

    tr = Trace(t=np.arange(n_steps + 1) * dt,
               position=np.zeros((n_steps + 1, 3)),
               clearance=np.zeros(n_steps + 1),
               residual=np.zeros(n_steps + 1),
               alpha_p0=np.zeros(n_steps + 1),
               alpha_gN=np.zeros(n_steps + 1),
               solve_ms=np.zeros(n_steps + 1),
               slack_max=np.zeros(n_steps + 1))

    def record(k, xk, a_p0=0.0, a_gN=0.0, ms=0.0, smax=0.0):
        tr.position[k] = xk[0:3]
        dTk = math.hypot(xk[0], xk[1]) - geom.radius
        tr.clearance[k] = dTk
        tr.residual[k] = geom.d_min - dTk
        tr.alpha_p0[k] = a_p0
        tr.alpha_gN[k] = a_gN
        tr.solve_ms[k] = ms
        tr.slack_max[k] = smax

    record(0, x)
    ref_err = np.zeros(n_steps + 1)
    ref0 = helix_reference(0.0, scenario.helix)
    ref_err[0] = np.linalg.norm(x[0:3] - ref0.position)

    completed = True
    abort_reason = ""
    k_done = 0
    for k in range(n_steps):
        t_k = k * dt
        try:
            tic = time.perf_counter()
            if controller == "robust":
                Pis = propagate_horizon_sensitivity(warm.states, warm.inputs,
                                                    dt, scenario.params)
                rho = np.hypot(warm.states[:, 0], warm.states[:, 1])
                jx = -warm.states[:, 0] / rho
                jy = -warm.states[:, 1] / rho
                Pi_y = jx[:, None] * Pis[:, 0, :] + jy[:, None] * Pis[:, 1, :]
                alpha_p = np.abs(Pi_y) @ w_upper + tcfg.epsilon_s
                margins = alpha_p + alpha_g
            else:
                margins = None
            problem = build_ocp(controller, x, t_k, margins, config=cfg,
                                geometry=geom, helix=scenario.helix,
                                params=scenario.params)
            sol = solver.rti_step(problem, warm)
            step_time = time.perf_counter() - tic
        except (GimbalLockError, SolverError) as exc:
            completed = False
            abort_reason = str(exc)
            break

        u0 = np.ascontiguousarray(sol.inputs[0])
        try:
            x = _kernels.rk4_step(x, u0, zeta_vec,
                                  np.ascontiguousarray(gusts[k]), dt,
                                  par, Z, TQ, True)
        except ValueError as exc:
            completed = False
            abort_reason = f"gimbal lock in plant: {exc}"
            break

        a_p0 = margins[0] - alpha_g[0] if controller == "robust" else 0.0
        a_gN = alpha_g[n] if controller == "robust" else 0.0
        record(k + 1, x, a_p0, a_gN, step_time * 1e3, float(sol.slacks.max()))
        ref_k = helix_reference((k + 1) * dt, scenario.helix)
        ref_err[k + 1] = np.linalg.norm(x[0:3] - ref_k.position)
        warm = solver.shift(sol)
        k_done = k + 1

    trace = tr if completed else tr.truncate(k_done + 1)
    n_inst = trace.t.size
    min_clear = float(np.min(trace.clearance))
    max_res = float(np.max(trace.residual))
    solve_ms = trace.solve_ms[1:n_inst]
    return TrialResult(
        zeta=zeta_true,
        min_clearance=min_clear,
        violated=bool(max_res > 0.0),
        max_residual=max_res,
        tracking_rmse=float(np.sqrt(np.mean(ref_err[:n_inst] ** 2))),
        avg_solve_time=float(np.mean(solve_ms)) * 1e-3 if solve_ms.size else 0.0,
        trace=trace,
        controller=controller,
        completed=completed,
        abort_reason=abort_reason,
    )


def run_trial_pair(index: int, base_seed: int, scenario: Scenario):
    """Run nominal and robust against the same realization of trial ``index``."""
    seed = base_seed + index
    zeta = sample_uncertainty(scenario.bounds, seed)
    gust = replace(scenario.gust, rng_seed=_gust_seed(seed))
    nom = run_closed_loop("nominal", zeta, gust, scenario)
    rob = run_closed_loop("robust", zeta, gust, scenario)
    return nom, rob


def _trial_worker(args):
    index, base_seed, scenario = args
    return index, run_trial_pair(index, base_seed, scenario)


def resolve_workers(n_trials: int) -> int:
    cap = os.environ.get("HELIXGUARD_THREADS", "")
    try:
        cap_n = int(cap) if cap else os.cpu_count() or 1
    except ValueError:
        cap_n = os.cpu_count() or 1
    return max(1, min(cap_n, n_trials, os.cpu_count() or 1))


def warm_up(scenario: Scenario = None):
    """Trigger JIT compilation of the hot path before timed campaigns."""
    sc = replace(scenario or default_scenario(), t_sim=3 * 0.025)
    run_trial_pair(0, 0, sc)


def summarize(trials) -> McSummary:
    """Aggregate one controller's trial list into campaign statistics."""
    pooled = np.concatenate([t.trace.residual for t in trials])
    qs = np.quantile(pooled, [0.0, 0.25, 0.5, 0.75, 1.0])
    return McSummary(
        n_trials=len(trials),
        violations=int(sum(t.violated for t in trials)),
        min_clearance_overall=float(min(t.min_clearance for t in trials)),
        residual_quartiles=tuple(float(q) for q in qs),
        solve_time_mean=float(np.mean([t.avg_solve_time for t in trials])),
    )


def monte_carlo(n_trials: int, base_seed: int, scenario: Scenario,
                trial_callback=None, workers: int = None):
    """Paired campaign over uniformly sampled mismatch realizations.

    Returns (nominal summary, robust summary).  ``trial_callback(i, nom, rob)``
    receives each pair in trial order, e.g. to stream traces to disk.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    warm_up(scenario)
    if workers is None:
        workers = resolve_workers(n_trials)

    results = [None] * n_trials
    if workers <= 1:
        for i in range(n_trials):
            results[i] = run_trial_pair(i, base_seed, scenario)
    else:
        jobs = [(i, base_seed, scenario) for i in range(n_trials)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, pair in pool.map(_trial_worker, jobs):
                results[idx] = pair

    noms = [r[0] for r in results]
    robs = [r[1] for r in results]
    if trial_callback is not None:
        for i, (nom, rob) in enumerate(results):
            trial_callback(i, nom, rob)
    return summarize(noms), summarize(robs)
