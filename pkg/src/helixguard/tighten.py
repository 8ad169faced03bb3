"""Clearance-constraint margins for the robustified controller.

Two additive margins inflate the minimum-clearance bound along the horizon:
a parametric one, the support function of the mismatch box evaluated at the
clearance-sensitivity row (a weighted l1 norm), and a gust one, the
worst-case open-loop double integration of the bounded gust acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import AXIS_EPS, DegenerateAxisError, TowerGeometry
from .model import N_STATES, N_UNCERTAIN, UncertaintyBounds


@dataclass(frozen=True)
class TighteningConfig:
    """Margin constants: numerical slack [m], gust bound [N], worst-case
    (lightest) mass [kg] and the controller sampling time [s]."""

    epsilon_s: float = 0.03
    gust_bound: float = 0.6
    mass_min: float = 0.9 * 2.57
    sampling_time: float = 0.025

    def __post_init__(self):
        if self.epsilon_s < 0:
            raise ValueError("slack must be nonnegative")
        if self.gust_bound < 0:
            raise ValueError("gust bound must be nonnegative")
        if self.mass_min <= 0:
            raise ValueError("minimum mass must be positive")
        if self.sampling_time <= 0:
            raise ValueError("sampling time must be positive")


def clearance_jacobian_row(x, geom: TowerGeometry) -> np.ndarray:
    """Row vector d y / d x of the residual y = d_min - d_T(p)."""
    x = np.asarray(x, dtype=float)
    rho = math.hypot(x[0], x[1])
    if rho <= AXIS_EPS:
        raise DegenerateAxisError("clearance gradient undefined on the axis")
    row = np.zeros(N_STATES)
    row[0] = -x[0] / rho
    row[1] = -x[1] / rho
    return row


def constraint_sensitivity(x, Pi, geom: TowerGeometry) -> np.ndarray:
    """Sensitivity of the clearance residual to the mismatch vector."""
    Pi = np.asarray(Pi, dtype=float)
    if Pi.shape != (N_STATES, N_UNCERTAIN):
        raise ValueError("sensitivity matrix must be 18x9")
    return clearance_jacobian_row(x, geom) @ Pi


def parametric_margin(Pi_y, bounds: UncertaintyBounds,
                      cfg: TighteningConfig) -> float:
    """Support function of the mismatch box at the sensitivity row, plus the
    numerical slack: sum_j |Pi_y_j| * bound_j + epsilon."""
    Pi_y = np.asarray(Pi_y, dtype=float)
    if Pi_y.shape != (N_UNCERTAIN,):
        raise ValueError("constraint sensitivity must have 9 components")
    return float(np.abs(Pi_y) @ bounds.upper) + cfg.epsilon_s


def gust_margin(stage: int, cfg: TighteningConfig) -> float:
    """Worst-case open-loop position drift of the bounded gust by stage i."""
    if stage < 0:
        raise ValueError("stage index must be nonnegative")
    tau = stage * cfg.sampling_time
    return 0.5 * (cfg.gust_bound / cfg.mass_min) * tau * tau


def tightened_bound(stage: int, Pi_y, bounds: UncertaintyBounds,
                    cfg: TighteningConfig, geom: TowerGeometry) -> float:
    """Stage-i right-hand side of the tightened clearance condition."""
    return geom.d_min + parametric_margin(Pi_y, bounds, cfg) + gust_margin(stage, cfg)


def horizon_margins(xs, Pis, bounds: UncertaintyBounds, cfg: TighteningConfig,
                    geom: TowerGeometry) -> np.ndarray:
    """Total margin (parametric + gust) per stage along a predicted trajectory.

    Adding these to d_min gives the stage bounds of the robust problem.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.shape[0]
    out = np.empty(n)
    for i in range(n):
        py = constraint_sensitivity(xs[i], Pis[i], geom)
        out[i] = parametric_margin(py, bounds, cfg) + gust_margin(i, cfg)
    return out
