"""helixguard: robust NMPC simulation toolkit for close-proximity helical
tower inspection with a tilted hexarotor.

The package compares a nominal tracking NMPC against a robustified variant
that tightens the tower-clearance constraint online using first-order
mismatch sensitivities and a closed-form gust margin, and evaluates both in
paired Monte-Carlo campaigns over bounded structured uncertainty.
"""

from ._backend import NUMBA_ENABLED, backend_name
from .geometry import (HelixSpec, ReferencePoint, TowerGeometry,
                       clearance_residual, helix_reference, tower_distance)
from .model import (ControlInput, GimbalLockError, GtmrParams, State,
                    UncertaintyBounds, UncertaintyVector, allocation_matrix,
                    dynamics, sample_uncertainty)
from .integrate import (discrete_jacobians, propagate_horizon_sensitivity,
                        rk4_sensitivity_step, rk4_step)
from .tighten import (TighteningConfig, clearance_jacobian_row,
                      constraint_sensitivity, gust_margin, parametric_margin,
                      tightened_bound)
from .ocp import NmpcConfig, OcpProblem, build_ocp, stage_cost, terminal_cost
from .solver import QpResult, RtiSolver, SolverError, SolverSolution, solve_qp
from .sim import (GustProcess, McSummary, Scenario, TrialResult,
                  default_scenario, monte_carlo, run_closed_loop,
                  synthesize_gust)
from .config import ConfigError, RunConfig

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED", "backend_name",
    "HelixSpec", "ReferencePoint", "TowerGeometry", "clearance_residual",
    "helix_reference", "tower_distance",
    "ControlInput", "GimbalLockError", "GtmrParams", "State",
    "UncertaintyBounds", "UncertaintyVector", "allocation_matrix", "dynamics",
    "sample_uncertainty",
    "discrete_jacobians", "propagate_horizon_sensitivity",
    "rk4_sensitivity_step", "rk4_step",
    "TighteningConfig", "clearance_jacobian_row", "constraint_sensitivity",
    "gust_margin", "parametric_margin", "tightened_bound",
    "NmpcConfig", "OcpProblem", "build_ocp", "stage_cost", "terminal_cost",
    "QpResult", "RtiSolver", "SolverError", "SolverSolution", "solve_qp",
    "GustProcess", "McSummary", "Scenario", "TrialResult", "default_scenario",
    "monte_carlo", "run_closed_loop", "synthesize_gust",
    "ConfigError", "RunConfig",
]
