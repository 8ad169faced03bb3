"""Self-contained oracle suites behind the ``check`` subcommand.

Each suite validates one numeric building block against an independent
reference computation: finite differences for the analytic Jacobians,
vertex enumeration for the box support function, Richardson extrapolation
for the integrator order, exhaustive active-set enumeration for the QP,
and direct re-integration for the gust-margin bound.  The same functions
back the pytest suite.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .integrate import continuous_jacobians, rk4_step
from .model import GtmrParams, UncertaintyBounds, dynamics
from .sim import Scenario, default_scenario, initial_state
from .solver import solve_qp
from .tighten import TighteningConfig, gust_margin


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _random_state(rng) -> np.ndarray:
    x = np.zeros(18)
    x[0:3] = rng.normal(0.0, 2.0, 3) + np.array([2.0, 0.0, 1.0])
    x[3:6] = rng.normal(0.0, 0.3, 3)
    x[6:9] = rng.normal(0.0, 1.0, 3)
    x[9:12] = rng.normal(0.0, 1.0, 3)
    x[12:18] = rng.uniform(30.0, 90.0, 6)
    return x


def check_jacobians(n_states: int = 100, tol: float = 1e-6,
                    seed: int = 0) -> SuiteResult:
    """Analytic df/dx and df/dzeta vs central finite differences."""
    rng = np.random.default_rng(seed)
    params = GtmrParams()
    u = np.zeros(6)
    eps = 1e-6
    worst = 0.0
    for _ in range(n_states):
        x = _random_state(rng)
        A, B = continuous_jacobians(x, params)
        scale_a = 1.0 + np.max(np.abs(A))
        scale_b = 1.0 + np.max(np.abs(B))
        for j in range(18):
            dx = np.zeros(18)
            dx[j] = eps
            col = (dynamics(x + dx, u, params=params)
                   - dynamics(x - dx, u, params=params)) / (2 * eps)
            worst = max(worst, np.max(np.abs(A[:, j] - col)) / scale_a)
        for j in range(9):
            dz = np.zeros(9)
            dz[j] = eps
            col = (dynamics(x, u, dz, params=params)
                   - dynamics(x, u, -dz, params=params)) / (2 * eps)
            worst = max(worst, np.max(np.abs(B[:, j] - col)) / scale_b)
    return SuiteResult("jacobian_finite_difference", worst < tol,
                       f"max relative deviation {worst:.2e} (tol {tol:g})")


def support_function_vertex_max(row: np.ndarray, upper: np.ndarray) -> float:
    """Brute-force maximum of |row . w| over all vertices of the box."""
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=len(upper)):
        v = abs(float(np.dot(row, np.asarray(signs) * upper)))
        if v > best:
            best = v
    return best


def check_support_function(n_cases: int = 1000, tol: float = 1e-12,
                           seed: int = 1) -> SuiteResult:
    """Weighted l1 closed form vs 2^9 vertex enumeration."""
    rng = np.random.default_rng(seed)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=9)))
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n_cases):
        row = rng.normal(0.0, 1.0, 9) * 10.0 ** rng.uniform(-2, 2)
        upper = rng.uniform(0.01, 2.0, 9)
        closed = float(np.abs(row) @ upper)
        brute = float(np.max(np.abs(signs @ (row * upper))))
        worst = max(worst, abs(closed - brute) / max(1.0, brute))
    dt = time.perf_counter() - t0
    return SuiteResult("support_function_vertices", worst < tol,
                       f"max deviation {worst:.2e} over {n_cases} cases "
                       f"in {dt:.2f} s")


def rk4_observed_order(seed: int = 2):
    """Observed convergence order of the integrator on the full dynamics."""
    params = GtmrParams()
    rng = np.random.default_rng(seed)
    x0 = _random_state(rng)
    x0[3:6] *= 0.3
    u = rng.normal(0.0, 3.0, 6)
    z = np.zeros(9)
    g = np.zeros(3)

    def integrate(dt, t_end=1.0):
        x = x0.copy()
        for _ in range(int(round(t_end / dt))):
            x = rk4_step(x, u, z, g, dt, params)
        return x

    ref = integrate(1e-4)
    errs = [np.linalg.norm(integrate(dt) - ref) for dt in (0.02, 0.01, 0.005)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    return orders, errs


def check_rk4_order(lo: float = 3.8, hi: float = 4.2) -> SuiteResult:
    orders, _ = rk4_observed_order()
    ok = all(lo <= o <= hi for o in orders)
    return SuiteResult("rk4_convergence_order", ok,
                       "observed orders " + ", ".join(f"{o:.2f}" for o in orders))


def enumerate_qp(H, g, C, d, tol=1e-9):
    """Exhaustive active-set enumeration oracle for small dense QPs."""
    n = H.shape[0]
    m = C.shape[0]
    for k in range(m + 1):
        for subset in itertools.combinations(range(m), k):
            S = list(subset)
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = H
            if k:
                kkt[:n, n:] = C[S].T
                kkt[n:, :n] = C[S]
            rhs = np.concatenate([-g, d[S]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            z, lam = sol[:n], sol[n:]
            if k and np.any(lam < -tol):
                continue
            if np.any(C @ z - d > tol):
                continue
            return z
    return None


def check_qp_enumeration(n_cases: int = 50, tol: float = 1e-8,
                         seed: int = 3) -> SuiteResult:
    """Active-set QP vs exhaustive enumeration on random problems."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n, m = 10, 5
        M = rng.normal(size=(n, n))
        H = M @ M.T + np.eye(n)
        g = rng.normal(size=n)
        C = rng.normal(size=(m, n))
        d = rng.normal(size=m)
        ref = enumerate_qp(H, g, C, d)
        res = solve_qp(H, g, C, d)
        if not res.ok or ref is None:
            return SuiteResult("qp_active_set_enumeration", False,
                               "solver or oracle failed")
        worst = max(worst, float(np.max(np.abs(res.z - ref))))
        kkt = float(np.max(np.abs(H @ res.z + g + C.T @ res.multipliers)))
        worst = max(worst, kkt)
    return SuiteResult("qp_active_set_enumeration", worst < tol,
                       f"max deviation {worst:.2e} over {n_cases} QPs")


def gust_displacement_bound(scenario: Scenario = None, n_headings: int = 100,
                            seed: int = 4):
    """Open-loop displacement of a worst-case constant gust vs the margin.

    Integrates the plant twice from the same state with frozen inputs, with
    and without a constant gust at the norm bound, and returns the largest
    ratio of displacement to the stage margin.
    """
    sc = scenario or default_scenario()
    params = sc.params
    par, Z, TQ = params.pack()
    cfg = TighteningConfig(gust_bound=sc.tightening.gust_bound,
                           mass_min=sc.tightening.mass_min,
                           sampling_time=sc.nmpc.sampling_time,
                           epsilon_s=sc.tightening.epsilon_s)
    n = sc.nmpc.horizon
    dt = cfg.sampling_time
    rng = np.random.default_rng(seed)
    x0 = initial_state(sc)
    us = np.zeros((n, 6))
    zeros = np.zeros(9)
    base = _kernels.rollout(x0, us, zeros, np.zeros(3), dt, par, Z, TQ, True)
    worst = -np.inf
    margins = np.array([gust_margin(i, cfg) for i in range(n + 1)])
    for _ in range(n_headings):
        h = rng.normal(0.0, 1.0, 3)
        h *= cfg.gust_bound / np.linalg.norm(h)
        gusted = _kernels.rollout(x0, us, zeros, h, dt, par, Z, TQ, True)
        disp = np.linalg.norm(gusted[:, 0:3] - base[:, 0:3], axis=1)
        for i in range(1, n + 1):
            worst = max(worst, disp[i] - margins[i])
    return worst


def check_gust_margin(tol: float = 1e-9) -> SuiteResult:
    worst = gust_displacement_bound()
    return SuiteResult("gust_margin_domination", worst <= tol,
                       f"max displacement minus margin {worst:.3e} m")


ALL_SUITES = (check_jacobians, check_support_function, check_rk4_order,
              check_qp_enumeration, check_gust_margin)


def run_all(verbose: bool = True):
    results = []
    for suite in ALL_SUITES:
        res = suite()
        results.append(res)
        if verbose:
            print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
    return results
