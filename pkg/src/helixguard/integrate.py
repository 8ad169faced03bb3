"""Fixed-step RK4 discretization and consistent sensitivity propagation.

The discrete state map is classical RK4 with inputs, mismatch and gust held
constant over the step.  Two derivative objects are produced from it:

* the exact Jacobians of the discrete map (chain rule through the RK4
  stages), used by the SQP linearization, and
* the mismatch sensitivity, propagated by RK4 applied to the coupled
  (state, sensitivity) ODE along the nominal trajectory with the
  sensitivity reset to zero at each horizon start.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .model import (GimbalLockError, GtmrParams, N_STATES, N_UNCERTAIN,
                    _as_vec)

SENSITIVITY_SHAPE = (N_STATES, N_UNCERTAIN)


def zero_sensitivity() -> np.ndarray:
    """Horizon-start value of the mismatch sensitivity matrix."""
    return np.zeros(SENSITIVITY_SHAPE)


def _rk4_generic(f, x, dt):
    # classical Butcher tableau; test hook shared with the compiled path
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(x, u, zeta=None, gust=(0.0, 0.0, 0.0), dt: float = 0.025,
             params: GtmrParams = None, gust_true_mass: bool = False) -> np.ndarray:
    """One RK4 step of the (possibly perturbed) continuous dynamics."""
    if dt <= 0:
        raise ValueError("step size must be positive")
    if params is None:
        params = GtmrParams()
    xv = _as_vec(x, N_STATES, "state")
    uv = _as_vec(u, 6, "input")
    zv = np.zeros(N_UNCERTAIN) if zeta is None else _as_vec(zeta, N_UNCERTAIN, "zeta")
    gv = _as_vec(gust, 3, "gust")
    par, Z, TQ = params.pack()
    try:
        return _kernels.rk4_step(xv, uv, zv, gv, dt, par, Z, TQ, bool(gust_true_mass))
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc


def rk4_sensitivity_step(x, u, Pi, dt: float, params: GtmrParams = None):
    """Advance the mismatch sensitivity one step along the nominal model.

    Returns the updated 18x9 matrix; the coupled state integration happens
    internally so the result is consistent with the nominal discrete map.
    """
    if params is None:
        params = GtmrParams()
    xv = _as_vec(x, N_STATES, "state")
    uv = _as_vec(u, 6, "input")
    Pi = np.asarray(Pi, dtype=float)
    if Pi.shape != SENSITIVITY_SHAPE:
        raise ValueError("sensitivity matrix must be 18x9")
    if not np.all(np.isfinite(Pi)):
        raise ValueError("sensitivity matrix must be finite")
    par, Z, TQ = params.pack()
    try:
        _, Pi1 = _kernels.sensitivity_step(xv, uv, np.ascontiguousarray(Pi),
                                           dt, par, Z, TQ)
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc
    return Pi1


def continuous_jacobians(x, params: GtmrParams = None):
    """Analytic (df/dx, df/dzeta) of the nominal continuous dynamics."""
    if params is None:
        params = GtmrParams()
    xv = _as_vec(x, N_STATES, "state")
    par, Z, TQ = params.pack()
    try:
        return _kernels.gtmr_jacobians(xv, par, Z, TQ)
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc


def discrete_jacobians(x, u, dt: float, params: GtmrParams = None):
    """Exact Jacobians (next_state, dF/dx, dF/du) of the RK4 map."""
    if params is None:
        params = GtmrParams()
    xv = _as_vec(x, N_STATES, "state")
    uv = _as_vec(u, 6, "input")
    par, Z, TQ = params.pack()
    try:
        x1, Ad, Bd, _, _ = _kernels.discrete_step_jacobians(xv, uv, dt, par, Z, TQ)
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc
    return x1, Ad, Bd


def propagate_horizon_sensitivity(xs, us, dt: float, params: GtmrParams = None):
    """Sensitivity matrices along a shooting trajectory, zero at the start."""
    if params is None:
        params = GtmrParams()
    xs = np.ascontiguousarray(xs, dtype=float)
    us = np.ascontiguousarray(us, dtype=float)
    par, Z, TQ = params.pack()
    try:
        return _kernels.propagate_sensitivity(xs, us, dt, par, Z, TQ)
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc
