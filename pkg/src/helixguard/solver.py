"""Gauss-Newton SQP in real-time-iteration mode.

One call of :meth:`RtiSolver.rti_step` performs exactly one Gauss-Newton
iteration: linearize the discrete dynamics and clearance rows along the warm
trajectory, condense onto the input increments, solve a dense QP with a dual
active-set method, and expand back to a state/input trajectory.

The clearance inequalities are handled in two phases: the QP is first solved
with hard rows (the common case, where the exact-penalty slacks would be zero
anyway); only if that problem is infeasible is it re-solved with explicit
slack variables carrying the L1 penalty (plus a small quadratic term that
keeps the Hessian well conditioned).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import (ControlInput, GimbalLockError, N_INPUTS, N_STATES, State)
from .ocp import OcpProblem

_EMPTY_PREFER = np.empty(0, dtype=np.int64)


class SolverError(RuntimeError):
    """QP or linearization failure that damping retries could not fix."""


@dataclass
class QpResult:
    z: np.ndarray
    multipliers: np.ndarray
    iterations: int
    status: int          # 0 ok, 1 infeasible, 2 max-iter, 3 not positive definite

    @property
    def ok(self) -> bool:
        return self.status == 0


def solve_qp(H, g, C=None, d=None, meq: int = 0, prefer=None) -> QpResult:
    """Solve min 1/2 z'Hz + g'z subject to C z <= d (first meq rows equal).

    H must be symmetric positive definite.  Deterministic for fixed inputs;
    ``prefer`` lists inequality rows to try first when expanding the active
    set, which implements warm starting across related solves.
    """
    H = np.ascontiguousarray(H, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    if C is None or len(C) == 0:
        C = np.zeros((0, H.shape[0]))
        d = np.zeros(0)
    C = np.ascontiguousarray(C, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    pref = (_EMPTY_PREFER if prefer is None
            else np.ascontiguousarray(prefer, dtype=np.int64))
    z, lam, iters, status = _kernels.solve_qp_dense(H, g, C, d, meq, pref)
    return QpResult(z=z, multipliers=lam, iterations=iters, status=status)


@dataclass
class SolverSolution:
    """Predicted trajectory with solver diagnostics."""

    states: np.ndarray            # (N+1, 18)
    inputs: np.ndarray            # (N, 6)
    slacks: np.ndarray            # (N+1,) clearance slack per stage [m]
    kkt_residual: float = np.inf
    qp_iterations: int = 0
    solve_time: float = 0.0
    active_rows: np.ndarray = field(default_factory=lambda: _EMPTY_PREFER)

    def state_list(self):
        return [State.from_vector(x) for x in self.states]

    def input_list(self):
        return [ControlInput.from_vector(u) for u in self.inputs]

    def validate(self):
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.inputs))):
            raise SolverError("non-finite trajectory")
        if np.any(self.slacks < -1e-12):
            raise SolverError("negative clearance slack")


class RtiSolver:
    """Stateful SQP driver; one instance per closed-loop run."""

    def __init__(self, lam_reg: float = 1e-6, slack_quad_factor: float = 1e-2,
                 max_damping_retries: int = 5):
        self.lam_reg = lam_reg
        self.slack_quad_factor = slack_quad_factor
        self.max_damping_retries = max_damping_retries
        self.last_qp = None
        self.last_linearization = None
        self._prefer = _EMPTY_PREFER

    # -- warm start helpers -------------------------------------------------

    @staticmethod
    def initial_solution(x0, horizon: int) -> SolverSolution:
        x0 = np.asarray(x0, dtype=float)
        xs = np.tile(x0, (horizon + 1, 1))
        us = np.zeros((horizon, N_INPUTS))
        return SolverSolution(states=xs, inputs=us, slacks=np.zeros(horizon + 1))

    @staticmethod
    def shift(sol: SolverSolution) -> SolverSolution:
        """Shift a solution one stage forward, duplicating the last stage."""
        xs = np.vstack([sol.states[1:], sol.states[-1:]])
        us = (np.vstack([sol.inputs[1:], sol.inputs[-1:]])
              if sol.inputs.shape[0] > 1 else sol.inputs.copy())
        sl = np.concatenate([sol.slacks[1:], sol.slacks[-1:]])
        return SolverSolution(states=xs, inputs=us, slacks=sl,
                              active_rows=sol.active_rows)

    # -- cost and merit ------------------------------------------------------

    @staticmethod
    def merit(problem: OcpProblem, xs, us) -> float:
        """Exact-penalty merit: tracking cost plus penalized clearance
        violations of the trajectory iterate."""
        from .ocp import stage_cost, terminal_cost
        from .geometry import tower_distance

        cfg = problem.config
        total = 0.0
        for i in range(cfg.horizon):
            total += stage_cost(xs[i], us[i], problem.references[i], cfg,
                                problem.params, problem.yaw_references[i],
                                problem.body_rate_reference)
        total += terminal_cost(xs[-1], problem.references[-1], cfg)
        pen = 0.0
        for i in range(cfg.horizon + 1):
            y = problem.stage_bounds[i] - tower_distance(xs[i], problem.geometry)
            if y > 0:
                pen += y
        return total + cfg.soft_penalty_weight * pen

    # -- main step -----------------------------------------------------------

    def rti_step(self, problem: OcpProblem, warm: SolverSolution) -> SolverSolution:
        """One Gauss-Newton real-time iteration from the warm-start solution."""
        t_start = time.perf_counter()
        cfg = problem.config
        n = cfg.horizon
        xs = np.ascontiguousarray(warm.states, dtype=float)
        us = np.ascontiguousarray(warm.inputs, dtype=float)
        if xs.shape != (n + 1, N_STATES) or us.shape != (n, N_INPUTS):
            raise ValueError("warm start dimensionally inconsistent")

        par, Z, TQ = problem.params.pack()
        dt = cfg.sampling_time
        try:
            xn, Ads, Bds, accJ, accv = _kernels.linearize_horizon(
                xs, us, dt, par, Z, TQ)
        except ValueError as exc:
            raise GimbalLockError(str(exc)) from exc

        dx0 = problem.initial_state - xs[0]

        # clearance geometry along the shooting states
        px = xs[:, 0]
        py = xs[:, 1]
        rho = np.hypot(px, py)
        if np.any(rho <= 1e-9):
            raise SolverError("shooting state on the tower axis")
        dT = rho - problem.geometry.radius
        jpx = -px / rho
        jpy = -py / rho

        qdiag = cfg.output_weights()
        qu = np.asarray(cfg.q_input, dtype=float)
        qf = np.asarray(cfg.q_terminal, dtype=float)
        xi_lo, xi_hi = cfg.rotor_speed_bounds
        u_max = cfg.rotor_rate_bound

        H, g, C, d, codes, stages, defects, yvals = _kernels.condense(
            dx0, xs, us, xn, Ads, Bds, accJ, accv,
            np.ascontiguousarray(problem.references),
            np.ascontiguousarray(problem.yaw_references),
            np.ascontiguousarray(problem.body_rate_reference),
            qdiag, qu, qf, dT, jpx, jpy,
            np.ascontiguousarray(problem.stage_bounds),
            xi_lo, xi_hi, u_max, self.lam_reg)

        self.last_linearization = dict(
            xs=xs, us=us, dx0=dx0, xn=xn, Ads=Ads, Bds=Bds, accJ=accJ,
            accv=accv, defects=defects, yvals=yvals, jpx=jpx, jpy=jpy,
            dT=dT)

        nv = n * N_INPUTS
        lam_extra = 0.0
        res = None
        for attempt in range(self.max_damping_retries + 1):
            Ht = H if lam_extra == 0.0 else H + lam_extra * np.eye(nv)
            res = solve_qp(Ht, g, C, d, meq=0, prefer=self._prefer)
            if res.status == 0:
                break
            if res.status == 1:
                break  # genuinely infeasible: go to the slack phase
            lam_extra = (self.lam_reg if lam_extra == 0.0 else lam_extra) * 10.0
        slack_tail = np.zeros(n)  # slacks for stages 1..N

        if res.status == 1:
            res, slack_tail = self._solve_with_slacks(
                H, g, C, d, codes, stages, n, cfg.soft_penalty_weight)
        if res.status == 2:
            raise SolverError("QP iteration limit exceeded")
        if res.status == 3:
            raise SolverError("QP Hessian not positive definite after damping")

        dU = res.z[:nv]
        dxs = _kernels.expand_step(Ads, Bds, defects, dx0, dU)

        new_xs = xs + dxs
        new_us = us + dU.reshape(n, N_INPUTS)

        # stage-0 clearance slack is fixed by the measured state
        s0 = max(0.0, yvals[0] + jpx[0] * dx0[0] + jpy[0] * dx0[1])
        slacks = np.concatenate([[s0], slack_tail])

        stat = float(np.max(np.abs(H @ dU)))
        feas = float(np.max(np.abs(defects))) if n > 0 else 0.0
        cviol = float(np.max(np.maximum(yvals - slacks, 0.0)))
        kkt = max(stat, feas, cviol)

        active = np.where(res.multipliers[:C.shape[0]] > 1e-12)[0].astype(np.int64)
        self._prefer = active
        self.last_qp = dict(H=H, g=g, C=C, d=d, codes=codes, stages=stages,
                            result=res)

        sol = SolverSolution(states=new_xs, inputs=new_us, slacks=slacks,
                             kkt_residual=kkt,
                             qp_iterations=res.iterations,
                             solve_time=time.perf_counter() - t_start,
                             active_rows=active)
        sol.validate()
        return sol

    def _solve_with_slacks(self, H, g, C, d, codes, stages, n, penalty):
        """Fallback QP with explicit clearance slacks (L1 + small L2)."""
        nv = H.shape[0]
        m = C.shape[0]
        nv2 = nv + n
        H2 = np.zeros((nv2, nv2))
        H2[:nv, :nv] = H
        w2 = penalty * self.slack_quad_factor
        for k in range(n):
            H2[nv + k, nv + k] = 2.0 * w2 + self.lam_reg
        g2 = np.concatenate([g, np.full(n, penalty)])
        C2 = np.zeros((m + n, nv2))
        C2[:m, :nv] = C
        d2 = np.concatenate([d, np.zeros(n)])
        for r in range(m):
            if codes[r] == 0:  # clearance row of stage i >= 1 gets -s_i
                C2[r, nv + stages[r] - 1] = -1.0
        for k in range(n):
            C2[m + k, nv + k] = -1.0
        res = solve_qp(H2, g2, C2, d2, meq=0)
        if res.status != 0:
            raise SolverError("slack-relaxed QP failed")
        return res, np.maximum(res.z[nv:], 0.0)
