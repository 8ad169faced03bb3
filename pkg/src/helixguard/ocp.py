"""Finite-horizon optimal control problem assembly (multiple shooting).

The nominal variant enforces the raw minimum clearance at every stage; the
robust variant replaces it with tightened stage bounds supplied by the
margin pipeline.  The mismatch sensitivity is propagated outside the
problem, along the previous predicted trajectory, so the assembled problem
keeps the receding-horizon structure of the nominal controller; the
clearance right-hand sides are the only difference between the variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (HelixSpec, TowerGeometry, reference_yaw,
                       sample_references)
from .model import GtmrParams, N_INPUTS, N_STATES, State, _as_vec, dynamics


@dataclass(frozen=True)
class NmpcConfig:
    """Horizon, weights and box sets of the tracking controller."""

    horizon: int = 20
    sampling_time: float = 0.025
    q_position: tuple = (50.0, 50.0, 80.0)
    q_velocity: tuple = (5.0, 5.0, 8.0)
    q_acceleration: tuple = (1.0, 1.0, 2.0)
    q_body_rate: tuple = (2.0, 2.0, 2.0)
    q_yaw: float = 5.0
    q_input: tuple = (0.001,) * 6
    q_terminal: tuple = (80.0, 80.0, 120.0)
    rotor_speed_bounds: tuple = (0.0, 110.0)
    rotor_rate_bound: float = 80.0
    soft_penalty_weight: float = 1e4

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least one stage")
        if self.sampling_time <= 0:
            raise ValueError("sampling time must be positive")
        for w in (*self.q_position, *self.q_velocity, *self.q_acceleration,
                  *self.q_body_rate, self.q_yaw, *self.q_input,
                  *self.q_terminal):
            if w < 0:
                raise ValueError("weights must be nonnegative")

    @classmethod
    def from_params(cls, params: GtmrParams, **kw) -> "NmpcConfig":
        kw.setdefault("rotor_speed_bounds",
                      (params.rotor_speed_min, params.rotor_speed_max))
        kw.setdefault("rotor_rate_bound", params.rotor_rate_max)
        return cls(**kw)

    def output_weights(self) -> np.ndarray:
        """Diagonal weights over [p, v, vdot, omega, yaw]; the body-rate and
        yaw channels regulate the tower-facing attitude rather than tracking
        the stacked position/velocity/acceleration reference."""
        return np.array([*self.q_position, *self.q_velocity,
                         *self.q_acceleration, *self.q_body_rate, self.q_yaw])


@dataclass(frozen=True)
class OcpProblem:
    """One receding-horizon problem instance ready for the solver."""

    variant: str
    initial_state: np.ndarray
    references: np.ndarray          # (N+1, 9) stacked [pos, vel, acc]
    stage_bounds: np.ndarray        # (N+1,) clearance right-hand sides [m]
    config: NmpcConfig
    geometry: TowerGeometry
    params: GtmrParams
    yaw_references: np.ndarray = None   # (N+1,) tower-facing heading [rad]
    body_rate_reference: np.ndarray = None  # (3,) orbit-consistent rate

    def __post_init__(self):
        n = self.config.horizon
        if self.references.shape != (n + 1, 9):
            raise ValueError("need N+1 stacked references")
        if self.stage_bounds.shape != (n + 1,):
            raise ValueError("inconsistent margin list length")
        if self.yaw_references is None:
            object.__setattr__(self, "yaw_references", np.zeros(n + 1))
        if self.body_rate_reference is None:
            object.__setattr__(self, "body_rate_reference", np.zeros(3))
        if self.yaw_references.shape != (n + 1,):
            raise ValueError("need N+1 yaw references")

    @property
    def n_clearance_rows(self) -> int:
        return self.config.horizon + 1

    @property
    def n_dynamics_blocks(self) -> int:
        return self.config.horizon

    @property
    def decision_dimension(self) -> int:
        """States, inputs and clearance slacks of the shooting problem."""
        n = self.config.horizon
        return (n + 1) * N_STATES + n * N_INPUTS + (n + 1)


def output_map(x, u, params: GtmrParams) -> np.ndarray:
    """Tracked channels [p, v, vdot] along the nominal dynamics.

    The input argument is kept for interface uniformity; with rate
    actuation the instantaneous acceleration depends on the state only.
    """
    xv = _as_vec(x, N_STATES, "state")
    xdot = dynamics(xv, u, None, (0.0, 0.0, 0.0), params)
    return np.concatenate([xv[0:3], xv[6:9], xdot[6:9]])


def stage_cost(x, u, ref, cfg: NmpcConfig, params: GtmrParams,
               yaw_ref: float = 0.0, body_rate_ref=(0.0, 0.0, 0.0)) -> float:
    """Weighted squared tracking error plus input-rate regularization.

    On top of the tracked [p, v, vdot] channels, the heading is regulated
    toward the tower-facing yaw and the body rates toward the orbit rate;
    without those terms the rate-actuated platform's free yaw loop is slowly
    destabilized by mismatch and the rotating force geometry.
    """
    xv = _as_vec(x, N_STATES, "state")
    uv = _as_vec(u, N_INPUTS, "input")
    r = ref.stacked() if hasattr(ref, "stacked") else np.asarray(ref, dtype=float)
    err = output_map(xv, uv, params) - r
    q = np.array([*cfg.q_position, *cfg.q_velocity, *cfg.q_acceleration])
    qu = np.asarray(cfg.q_input)
    qw = np.asarray(cfg.q_body_rate)
    w = xv[9:12] - np.asarray(body_rate_ref, dtype=float)
    dpsi = xv[5] - yaw_ref
    return float(err @ (q * err) + uv @ (qu * uv) + w @ (qw * w)
                 + cfg.q_yaw * dpsi * dpsi)


def terminal_cost(x, ref, cfg: NmpcConfig) -> float:
    """Weighted squared terminal position error."""
    xv = _as_vec(x, N_STATES, "state")
    pref = (ref.position if hasattr(ref, "position")
            else np.asarray(ref, dtype=float)[0:3])
    err = xv[0:3] - pref
    return float(err @ (np.asarray(cfg.q_terminal) * err))


def build_ocp(variant: str, x0, t0: float, margins=None, *,
              config: NmpcConfig, geometry: TowerGeometry, helix: HelixSpec,
              params: GtmrParams) -> OcpProblem:
    """Assemble the stage data of one nominal or robust problem.

    ``margins`` must be the per-stage total tightening (parametric + gust)
    for the robust variant and is ignored for the nominal one.
    """
    if variant not in ("nominal", "robust"):
        raise ValueError("variant must be 'nominal' or 'robust'")
    n = config.horizon
    x0v = x0.flatten() if isinstance(x0, State) else _as_vec(x0, N_STATES, "state")
    refs = sample_references(t0, n, config.sampling_time, helix)
    yawrefs = np.array([reference_yaw(t0 + i * config.sampling_time, helix)
                        for i in range(n + 1)])
    wref = np.array([0.0, 0.0, helix.angular_rate])
    if variant == "nominal":
        bounds = np.full(n + 1, geometry.d_min)
    else:
        if margins is None:
            raise ValueError("robust variant requires a margin list")
        m = np.asarray(margins, dtype=float)
        if m.shape != (n + 1,):
            raise ValueError("inconsistent margin list length")
        if np.any(m < 0):
            raise ValueError("margins must be nonnegative")
        bounds = geometry.d_min + m
    return OcpProblem(variant=variant, initial_state=x0v, references=refs,
                      stage_bounds=bounds, config=config, geometry=geometry,
                      params=params, yaw_references=yawrefs,
                      body_rate_reference=wref)
