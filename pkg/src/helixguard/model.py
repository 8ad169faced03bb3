"""Tilted-hexarotor rigid-body model with structured mismatch and gusts.

The vehicle has six rotors on arms at 60 degree azimuth spacing; each rotor
axis is tilted by a fixed angle about its arm, with alternating tilt sign and
alternating spin direction.  The tilt gives the platform lateral thrust
authority (full-rank wrench allocation), which is what makes close-proximity
orbital flight with a fixed heading possible in the first place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

N_STATES = _kernels.NX
N_INPUTS = _kernels.NU
N_UNCERTAIN = _kernels.NZ


class GimbalLockError(RuntimeError):
    """Pitch angle left the validity region of the Euler parametrization."""


@dataclass(frozen=True)
class GtmrParams:
    """Nominal physical constants of the hexarotor.

    Units: mass kg, inertia kg m^2, arm m, c_f N/Hz^2, c_t N m/Hz^2,
    rotor speeds Hz, rotor rates Hz/s, tilt rad.
    """

    n_rotors: int = 6
    tilt_angle: float = math.radians(20.0)
    mass: float = 2.57
    inertia_diag: tuple = (0.11, 0.11, 0.19)
    arm_length: float = 0.39
    c_f: float = 11.8e-4
    c_t: float = 2.5e-5
    gravity: float = 9.81
    drag_coeff_nominal: float = 0.10
    rotor_speed_min: float = 0.0
    rotor_speed_max: float = 110.0
    rotor_rate_max: float = 80.0

    def __post_init__(self):
        if self.n_rotors != 6:
            raise ValueError("model is specialized to six rotors")
        if self.mass <= 0 or min(self.inertia_diag) <= 0:
            raise ValueError("mass and inertia must be positive")
        if self.c_f <= 0 or self.c_t <= 0 or self.arm_length <= 0:
            raise ValueError("c_f, c_t and arm_length must be positive")
        if not (0.0 <= self.rotor_speed_min < self.rotor_speed_max):
            raise ValueError("need 0 <= rotor_speed_min < rotor_speed_max")
        if self.rotor_rate_max <= 0:
            raise ValueError("rotor_rate_max must be positive")
        if not (0.0 < self.tilt_angle < math.pi / 2):
            raise ValueError("tilt angle must lie in (0, pi/2)")

    def pack(self):
        """(par, Z, TQ) arrays consumed by the numeric kernels."""
        par = np.array([self.mass, *self.inertia_diag, self.c_f,
                        self.gravity, self.drag_coeff_nominal])
        A = allocation_matrix(self)
        Z = np.ascontiguousarray(A[:3, :])
        TQ = np.ascontiguousarray(A[3:, :])
        return par, Z, TQ

    def hover_speed(self) -> float:
        """Rotor speed [Hz] balancing gravity with all rotors equal."""
        return math.sqrt(self.mass * self.gravity
                         / (self.n_rotors * self.c_f * math.cos(self.tilt_angle)))


@dataclass(frozen=True)
class UncertaintyVector:
    """Structured mismatch: relative mass/inertia/thrust/drag errors and a
    persistent wind-bias force [N]."""

    delta_m: float = 0.0
    delta_J: tuple = (0.0, 0.0, 0.0)
    delta_T: float = 0.0
    delta_D: float = 0.0
    wind_bias: tuple = (0.0, 0.0, 0.0)

    def flatten(self) -> np.ndarray:
        return np.array([self.delta_m, *self.delta_J, self.delta_T,
                         self.delta_D, *self.wind_bias])

    @classmethod
    def from_vector(cls, v) -> "UncertaintyVector":
        v = np.asarray(v, dtype=float)
        if v.shape != (N_UNCERTAIN,):
            raise ValueError("mismatch vector must have 9 components")
        return cls(delta_m=float(v[0]), delta_J=tuple(v[1:4]),
                   delta_T=float(v[4]), delta_D=float(v[5]),
                   wind_bias=tuple(v[6:9]))

    @classmethod
    def zero(cls) -> "UncertaintyVector":
        return cls()


@dataclass(frozen=True)
class UncertaintyBounds:
    """Symmetric componentwise box for the mismatch vector."""

    upper: np.ndarray = field(
        default_factory=lambda: np.array(
            [0.10, 0.15, 0.15, 0.20, 0.10, 0.20, 0.8, 0.8, 0.3]))

    def __post_init__(self):
        up = np.asarray(self.upper, dtype=float)
        if up.shape != (N_UNCERTAIN,):
            raise ValueError("bounds must have 9 components")
        if np.any(up <= 0):
            raise ValueError("all bound components must be positive")
        object.__setattr__(self, "upper", up)

    @property
    def lower(self) -> np.ndarray:
        return -self.upper

    def scaled(self, factor: float) -> "UncertaintyBounds":
        return UncertaintyBounds(upper=self.upper * factor)


@dataclass(frozen=True)
class State:
    """Vehicle state: inertial position/velocity, ZYX Euler attitude, body
    rates, rotor speeds."""

    position: tuple = (0.0, 0.0, 0.0)
    euler: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    body_rates: tuple = (0.0, 0.0, 0.0)
    rotor_speeds: tuple = (0.0,) * 6

    def flatten(self) -> np.ndarray:
        return np.array([*self.position, *self.euler, *self.velocity,
                         *self.body_rates, *self.rotor_speeds])

    @classmethod
    def from_vector(cls, v) -> "State":
        v = np.asarray(v, dtype=float)
        if v.shape != (N_STATES,):
            raise ValueError("state vector must have 18 components")
        return cls(position=tuple(v[0:3]), euler=tuple(v[3:6]),
                   velocity=tuple(v[6:9]), body_rates=tuple(v[9:12]),
                   rotor_speeds=tuple(v[12:18]))


@dataclass(frozen=True)
class ControlInput:
    """Rotor-speed rate command [Hz/s]."""

    rotor_rates: tuple = (0.0,) * 6

    def flatten(self) -> np.ndarray:
        return np.asarray(self.rotor_rates, dtype=float)

    @classmethod
    def from_vector(cls, v) -> "ControlInput":
        v = np.asarray(v, dtype=float)
        if v.shape != (N_INPUTS,):
            raise ValueError("input vector must have 6 components")
        return cls(rotor_rates=tuple(v))


def allocation_matrix(params: GtmrParams) -> np.ndarray:
    """Map per-rotor thrust magnitudes [N] to the body wrench [force; torque].

    Rotor i sits at azimuth i*60 deg, its thrust axis tilted by (-1)^i times
    the tilt angle about the arm direction; spin alternates with the same
    sign, coupling the drag torque through c_t/c_f.
    """
    a = params.tilt_angle
    kt = params.c_t / params.c_f
    A = np.zeros((6, 6))
    for i in range(6):
        gam = i * math.pi / 3.0
        cg, sg = math.cos(gam), math.sin(gam)
        th = (-1.0) ** i * a
        st, ct = math.sin(th), math.cos(th)
        z = np.array([st * sg, -st * cg, ct])
        arm = params.arm_length * np.array([cg, sg, 0.0])
        spin = (-1.0) ** i
        A[:3, i] = z
        A[3:, i] = np.cross(arm, z) + spin * kt * z
    return A


def _as_vec(x, n, name):
    v = x.flatten() if hasattr(x, "flatten") else np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{name} must have {n} components")
    return v


def dynamics(x, u, zeta=None, gust=(0.0, 0.0, 0.0), params: GtmrParams = None,
             gust_true_mass: bool = False) -> np.ndarray:
    """Continuous-time derivative of the perturbed vehicle.

    Implements the prediction model: the gust force maps through a constant
    selection onto the translational channels (scaled by the nominal mass);
    pass ``gust_true_mass=True`` for the physical plant where the gust
    accelerates the actual (mismatched) mass.
    """
    if params is None:
        params = GtmrParams()
    xv = _as_vec(x, N_STATES, "state")
    uv = _as_vec(u, N_INPUTS, "input")
    zv = (np.zeros(N_UNCERTAIN) if zeta is None
          else _as_vec(zeta, N_UNCERTAIN, "zeta"))
    gv = _as_vec(gust, 3, "gust")
    if not np.all(np.isfinite(gv)):
        raise ValueError("gust force must be finite")
    par, Z, TQ = params.pack()
    try:
        return _kernels.gtmr_rhs(xv, uv, zv, gv, par, Z, TQ, bool(gust_true_mass))
    except ValueError as exc:
        raise GimbalLockError(str(exc)) from exc


def sample_uncertainty(bounds: UncertaintyBounds, rng_seed: int) -> UncertaintyVector:
    """Draw each mismatch component independently uniform within its bound."""
    rng = np.random.default_rng(rng_seed)
    v = rng.uniform(bounds.lower, bounds.upper)
    return UncertaintyVector.from_vector(v)
