"""Tower clearance functions and the helical inspection reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

AXIS_EPS = 1e-9


class DegenerateAxisError(ValueError):
    """Position too close to the tower axis for a well-defined gradient."""


@dataclass(frozen=True)
class TowerGeometry:
    """Vertical cylinder of radius ``radius`` with clearance thresholds."""

    radius: float = 1.0
    d_min: float = 0.20
    d_ref: float = 0.35

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("tower radius must be positive")
        if not (0.0 < self.d_min < self.d_ref):
            raise ValueError("need 0 < d_min < d_ref")


@dataclass(frozen=True)
class HelixSpec:
    """Helical orbit on the preferred-offset surface around the tower."""

    orbit_radius: float = 1.35
    angular_rate: float = 2.0 * math.pi / 25.0
    climb_rate: float = 0.05
    initial_altitude: float = 1.0
    initial_phase: float = 0.0

    def __post_init__(self):
        if self.angular_rate == 0.0:
            raise ValueError("angular rate must be nonzero")

    @classmethod
    def for_tower(cls, geom: TowerGeometry, **kw) -> "HelixSpec":
        return cls(orbit_radius=geom.radius + geom.d_ref, **kw)


@dataclass(frozen=True)
class ReferencePoint:
    """Sample of the reference with analytic velocity and acceleration."""

    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.acceleration])


def tower_distance(p, geom: TowerGeometry) -> float:
    """Signed radial distance from the tower surface (negative inside)."""
    p = np.asarray(p, dtype=float)
    rho = math.hypot(p[0], p[1])
    if rho <= AXIS_EPS:
        raise DegenerateAxisError("position on the tower axis")
    return rho - geom.radius


def clearance_residual(p, geom: TowerGeometry) -> float:
    """Constraint residual d_min - d_T(p); positive means violation."""
    return geom.d_min - tower_distance(p, geom)


def helix_reference(t: float, spec: HelixSpec) -> ReferencePoint:
    """Evaluate the helix and its first two time derivatives at time t."""
    if t < 0:
        raise ValueError("reference time must be nonnegative")
    w = spec.angular_rate
    ph = w * t + spec.initial_phase
    r = spec.orbit_radius
    c, s = math.cos(ph), math.sin(ph)
    pos = np.array([r * c, r * s, spec.initial_altitude + spec.climb_rate * t])
    vel = np.array([-r * w * s, r * w * c, spec.climb_rate])
    acc = np.array([-r * w * w * c, -r * w * w * s, 0.0])
    return ReferencePoint(pos, vel, acc)


def reference_yaw(t: float, spec: HelixSpec) -> float:
    """Tower-facing heading along the orbit (diagnostic only)."""
    return spec.angular_rate * t + spec.initial_phase + math.pi


def sample_references(t0: float, n: int, dt: float, spec: HelixSpec) -> np.ndarray:
    """(n+1, 9) array of stacked reference samples at t0 + i*dt."""
    out = np.empty((n + 1, 9))
    for i in range(n + 1):
        out[i] = helix_reference(t0 + i * dt, spec).stacked()
    return out
