"""Flat sectioned key/value run configuration.

Every key has a default reproducing the reference inspection scenario, so an
empty (or absent) file runs the standard campaign.  The format is INI-style:
diffable, language-neutral, one scalar or comma-separated vector per key.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

from .geometry import HelixSpec, TowerGeometry
from .model import GtmrParams, UncertaintyBounds
from .ocp import NmpcConfig
from .sim import GustProcess, Scenario
from .tighten import TighteningConfig


class ConfigError(ValueError):
    """Malformed configuration file."""


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_SCHEMA = {
    "gtmr": {
        "n_rotors": int,
        "tilt_angle_deg": float,
        "mass": float,
        "inertia": "vec3",
        "arm_length": float,
        "c_f": float,
        "c_t": float,
        "gravity": float,
        "drag_coeff": float,
        "rotor_speed_min": float,
        "rotor_speed_max": float,
        "rotor_rate_max": float,
    },
    "tower": {"radius": float, "d_min": float, "d_ref": float},
    "helix": {
        "angular_rate": float,
        "climb_rate": float,
        "initial_altitude": float,
        "initial_phase": float,
    },
    "nmpc": {
        "horizon": int,
        "sampling_time": float,
        "q_position": "vec3",
        "q_velocity": "vec3",
        "q_acceleration": "vec3",
        "q_body_rate": "vec3",
        "q_yaw": float,
        "q_terminal": "vec3",
        "q_input": float,
        "soft_penalty_weight": float,
    },
    "uncertainty": {
        "mass_bound": float,
        "inertia_bound": "vec3",
        "thrust_bound": float,
        "drag_bound": float,
        "wind_bias_bound": "vec3",
    },
    "tightening": {"epsilon_s": float},
    "gust": {"bound": float, "correlation_time": float},
    "campaign": {
        "t_sim": float,
        "controller": str,
        "n_trials": int,
        "base_seed": int,
        "output_dir": str,
    },
}


@dataclass
class RunConfig:
    """All scenario constants plus campaign settings, as flat key/values."""

    values: dict = field(default_factory=dict)

    @classmethod
    def defaults(cls) -> "RunConfig":
        p = GtmrParams()
        g = TowerGeometry()
        h = HelixSpec()
        n = NmpcConfig()
        b = UncertaintyBounds()
        t = TighteningConfig()
        w = GustProcess()
        vals = {
            ("gtmr", "n_rotors"): p.n_rotors,
            ("gtmr", "tilt_angle_deg"): math.degrees(p.tilt_angle),
            ("gtmr", "mass"): p.mass,
            ("gtmr", "inertia"): tuple(p.inertia_diag),
            ("gtmr", "arm_length"): p.arm_length,
            ("gtmr", "c_f"): p.c_f,
            ("gtmr", "c_t"): p.c_t,
            ("gtmr", "gravity"): p.gravity,
            ("gtmr", "drag_coeff"): p.drag_coeff_nominal,
            ("gtmr", "rotor_speed_min"): p.rotor_speed_min,
            ("gtmr", "rotor_speed_max"): p.rotor_speed_max,
            ("gtmr", "rotor_rate_max"): p.rotor_rate_max,
            ("tower", "radius"): g.radius,
            ("tower", "d_min"): g.d_min,
            ("tower", "d_ref"): g.d_ref,
            ("helix", "angular_rate"): h.angular_rate,
            ("helix", "climb_rate"): h.climb_rate,
            ("helix", "initial_altitude"): h.initial_altitude,
            ("helix", "initial_phase"): h.initial_phase,
            ("nmpc", "horizon"): n.horizon,
            ("nmpc", "sampling_time"): n.sampling_time,
            ("nmpc", "q_position"): tuple(n.q_position),
            ("nmpc", "q_velocity"): tuple(n.q_velocity),
            ("nmpc", "q_acceleration"): tuple(n.q_acceleration),
            ("nmpc", "q_body_rate"): tuple(n.q_body_rate),
            ("nmpc", "q_yaw"): n.q_yaw,
            ("nmpc", "q_terminal"): tuple(n.q_terminal),
            ("nmpc", "q_input"): n.q_input[0],
            ("nmpc", "soft_penalty_weight"): n.soft_penalty_weight,
            ("uncertainty", "mass_bound"): float(b.upper[0]),
            ("uncertainty", "inertia_bound"): tuple(b.upper[1:4]),
            ("uncertainty", "thrust_bound"): float(b.upper[4]),
            ("uncertainty", "drag_bound"): float(b.upper[5]),
            ("uncertainty", "wind_bias_bound"): tuple(b.upper[6:9]),
            ("tightening", "epsilon_s"): t.epsilon_s,
            ("gust", "bound"): w.bound,
            ("gust", "correlation_time"): w.correlation_time,
            ("campaign", "t_sim"): 50.0,
            ("campaign", "controller"): "robust",
            ("campaign", "n_trials"): 100,
            ("campaign", "base_seed"): 2024,
            ("campaign", "output_dir"): "out",
        }
        return cls(values=vals)

    # -- parsing -------------------------------------------------------------

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls.defaults()
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for section in parser.sections():
            if section not in _SCHEMA:
                line = _find_line(text, f"[{section}]")
                raise ConfigError(
                    f"{source}:{line}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    line = _find_line(text, key)
                    raise ConfigError(
                        f"{source}:{line}: unknown key '{key}' in [{section}]")
                cfg.values[(section, key)] = _convert(
                    section, key, raw, text, source)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read(), source=str(path))

    def serialize(self) -> str:
        out = io.StringIO()
        section = None
        for (sec, key), val in self.values.items():
            if sec != section:
                if section is not None:
                    out.write("\n")
                out.write(f"[{sec}]\n")
                section = sec
            out.write(f"{key} = {_fmt(val)}\n")
        return out.getvalue()

    # -- materialization -----------------------------------------------------

    def get(self, sec, key):
        return self.values[(sec, key)]

    def scenario(self) -> Scenario:
        v = self.values
        params = GtmrParams(
            n_rotors=v[("gtmr", "n_rotors")],
            tilt_angle=math.radians(v[("gtmr", "tilt_angle_deg")]),
            mass=v[("gtmr", "mass")],
            inertia_diag=tuple(v[("gtmr", "inertia")]),
            arm_length=v[("gtmr", "arm_length")],
            c_f=v[("gtmr", "c_f")],
            c_t=v[("gtmr", "c_t")],
            gravity=v[("gtmr", "gravity")],
            drag_coeff_nominal=v[("gtmr", "drag_coeff")],
            rotor_speed_min=v[("gtmr", "rotor_speed_min")],
            rotor_speed_max=v[("gtmr", "rotor_speed_max")],
            rotor_rate_max=v[("gtmr", "rotor_rate_max")],
        )
        geom = TowerGeometry(radius=v[("tower", "radius")],
                             d_min=v[("tower", "d_min")],
                             d_ref=v[("tower", "d_ref")])
        helix = HelixSpec(orbit_radius=geom.radius + geom.d_ref,
                          angular_rate=v[("helix", "angular_rate")],
                          climb_rate=v[("helix", "climb_rate")],
                          initial_altitude=v[("helix", "initial_altitude")],
                          initial_phase=v[("helix", "initial_phase")])
        nmpc = NmpcConfig(
            horizon=v[("nmpc", "horizon")],
            sampling_time=v[("nmpc", "sampling_time")],
            q_position=tuple(v[("nmpc", "q_position")]),
            q_velocity=tuple(v[("nmpc", "q_velocity")]),
            q_acceleration=tuple(v[("nmpc", "q_acceleration")]),
            q_body_rate=tuple(v[("nmpc", "q_body_rate")]),
            q_yaw=v[("nmpc", "q_yaw")],
            q_terminal=tuple(v[("nmpc", "q_terminal")]),
            q_input=(v[("nmpc", "q_input")],) * 6,
            rotor_speed_bounds=(params.rotor_speed_min, params.rotor_speed_max),
            rotor_rate_bound=params.rotor_rate_max,
            soft_penalty_weight=v[("nmpc", "soft_penalty_weight")],
        )
        import numpy as np
        bounds = UncertaintyBounds(upper=np.array([
            v[("uncertainty", "mass_bound")],
            *v[("uncertainty", "inertia_bound")],
            v[("uncertainty", "thrust_bound")],
            v[("uncertainty", "drag_bound")],
            *v[("uncertainty", "wind_bias_bound")],
        ]))
        tight = TighteningConfig(
            epsilon_s=v[("tightening", "epsilon_s")],
            gust_bound=v[("gust", "bound")],
            mass_min=(1.0 - v[("uncertainty", "mass_bound")]) * params.mass,
            sampling_time=nmpc.sampling_time,
        )
        gust = GustProcess(correlation_time=v[("gust", "correlation_time")],
                           bound=v[("gust", "bound")])
        return Scenario(params=params, geometry=geom, helix=helix, nmpc=nmpc,
                        bounds=bounds, tightening=tight, gust=gust,
                        t_sim=v[("campaign", "t_sim")])


def _convert(section, key, raw, text, source):
    kind = _SCHEMA[section][key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "vec3":
            parts = [float(x) for x in raw.replace(",", " ").split()]
            if len(parts) != 3:
                raise ValueError("expected three components")
            return tuple(parts)
        return raw.strip()
    except ValueError as exc:
        line = _find_line(text, key)
        raise ConfigError(
            f"{source}:{line}: bad value for '{key}': {raw!r} ({exc})") from exc


def _find_line(text, needle):
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 0
