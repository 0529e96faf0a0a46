"""Dynamic bicycle model of a small autonomous car.

Covers the kinematic position/heading rates, linear tire forces, the
Newton-Euler body accelerations and the two-state lateral model
``d/dt [v_y, r] = [[A, B], [C, D]] [v_y, r] + [E, F] delta`` used for
one-step state estimation.

The lateral matrices are built from the formulas exactly as published for
the QCar testbed, which differ in sign from the textbook linear bicycle
model. ``convention="sum-form"`` only changes the yaw-damping entry ``D``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Mapping, Union

import numpy as np

AS_PRINTED = "as-printed"
SUM_FORM = "sum-form"
CONVENTIONS = (AS_PRINTED, SUM_FORM)

DEFAULT_STEERING_LIMIT = math.pi / 6
DEFAULT_DT = 0.01


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants. Defaults are the QCar values (m=2.7 kg, l_f=l_r=0.16 m,
    I_z=0.0441 kg m^2, unit cornering stiffness, 1 m/s nominal speed)."""

    mass: float = 2.7
    lf: float = 0.16
    lr: float = 0.16
    iz: float = 0.0441
    c1: float = 1.0
    c2: float = 1.0
    vx: float = 1.0

    def __post_init__(self):
        for name in ("mass", "lf", "lr", "iz"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("c1", "c2", "vx"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.vx == 0:
            raise ValueError("nominal speed vx must be non-zero")


@dataclass(frozen=True)
class LateralState:
    vy: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.vy) and math.isfinite(self.r)):
            raise ValueError("lateral state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.vy, self.r], dtype=float)


@dataclass(frozen=True)
class KinematicState:
    """Pose and speed. Angles in radians; ``x, y`` follow the kinematic rates,
    ``X, Y`` the global-frame rates."""

    x: float = 0.0
    y: float = 0.0
    X: float = 0.0
    Y: float = 0.0
    psi: float = 0.0
    beta: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("speed v must be non-negative")


@dataclass(frozen=True)
class ControlInput:
    delta: float = 0.0
    ax: float = 0.0
    steering_limit: float = DEFAULT_STEERING_LIMIT

    def __post_init__(self):
        if abs(self.delta) > self.steering_limit:
            raise ValueError(
                f"|delta|={abs(self.delta):.4f} rad exceeds steering limit {self.steering_limit:.4f}"
            )


@dataclass(frozen=True)
class TireState:
    alpha_f: float
    alpha_r: float
    fyf: float
    fyr: float
    fxf: float
    fxr: float
    fx: float
    fy: float
    torque: float


@dataclass(frozen=True)
class StateSpace:
    """Entries of the lateral model; ``matrix`` is [[a, b], [c, d]], ``input`` is [e, f]."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    convention: str = AS_PRINTED

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c, self.d, self.e, self.f)):
            raise ValueError("state-space entries must be finite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def input(self) -> np.ndarray:
        return np.array([self.e, self.f])

    def derivatives(self, vy, r, delta):
        """Vectorised right-hand side; accepts scalars or equal-shape arrays."""
        vy_dot = self.a * vy + self.b * r + self.e * delta
        r_dot = self.c * vy + self.d * r + self.f * delta
        return vy_dot, r_dot


# Entries as published for the QCar (rounded to four decimals).
QCAR_PUBLISHED = StateSpace(a=0.7407, b=0.0, c=0.0, d=1.1598, e=-0.3703, f=-3.6244, convention="published")


@dataclass(frozen=True)
class DynamicsConfig:
    params: VehicleParams = field(default_factory=VehicleParams)
    dt: float = DEFAULT_DT
    convention: str = AS_PRINTED
    steering_limit: float = DEFAULT_STEERING_LIMIT
    textbook_kinematics: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}; expected one of {CONVENTIONS}")
        if self.steering_limit <= 0:
            raise ValueError("steering_limit must be positive")

    def state_space(self) -> StateSpace:
        return system_matrices(self.params, self.convention)


_PARAM_KEYS = {"mass": "mass", "lf": "lf", "lr": "lr", "iz": "iz", "c1": "c1", "c2": "c2", "vx": "vx"}


def dynamics_config_from_mapping(values: Mapping[str, str]) -> DynamicsConfig:
    unknown = set(values) - set(_PARAM_KEYS) - {"dt", "convention", "steering_limit", "textbook_kinematics"}
    if unknown:
        raise ValueError(f"unknown vehicle config keys: {sorted(unknown)}")
    params = VehicleParams(**{_PARAM_KEYS[k]: float(v) for k, v in values.items() if k in _PARAM_KEYS})
    kwargs = {}
    if "dt" in values:
        kwargs["dt"] = float(values["dt"])
    if "convention" in values:
        kwargs["convention"] = str(values["convention"]).strip()
    if "steering_limit" in values:
        kwargs["steering_limit"] = float(values["steering_limit"])
    if "textbook_kinematics" in values:
        kwargs["textbook_kinematics"] = str(values["textbook_kinematics"]).strip().lower() in ("1", "true", "yes", "on")
    return DynamicsConfig(params=params, **kwargs)


def load_dynamics_config(path: Union[str, PathLike], section: str = "vehicle") -> DynamicsConfig:
    """Read ``key = value`` vehicle settings from an INI-style file.

    A file without section headers is accepted and read as a single section.
    """
    text = open(path, encoding="utf-8").read()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser.read_string(f"[{section}]\n" + text)
    if not parser.has_section(section):
        return DynamicsConfig()
    return dynamics_config_from_mapping(dict(parser.items(section)))


def dynamics_config_to_mapping(cfg: DynamicsConfig) -> dict:
    p = cfg.params
    return {
        "mass": repr(p.mass), "lf": repr(p.lf), "lr": repr(p.lr), "iz": repr(p.iz),
        "c1": repr(p.c1), "c2": repr(p.c2), "vx": repr(p.vx),
        "dt": repr(cfg.dt), "convention": cfg.convention,
        "steering_limit": repr(cfg.steering_limit),
        "textbook_kinematics": str(cfg.textbook_kinematics).lower(),
    }


def sideslip(delta: float, params: VehicleParams) -> float:
    """Kinematic sideslip of the velocity vector, beta = atan(l_r/(l_f+l_r) * tan(delta))."""
    return math.atan(params.lr / (params.lf + params.lr) * math.tan(delta))


def kinematic_rates(state: KinematicState, params: VehicleParams) -> tuple[float, float, float]:
    heading = state.psi + state.beta
    x_dot = state.v * math.cos(heading)
    y_dot = state.v * math.sin(heading)
    psi_dot = state.v / params.lr * math.sin(state.beta)
    return x_dot, y_dot, psi_dot


def tire_forces(params: VehicleParams, lat: LateralState, u: ControlInput) -> TireState:
    if params.vx == 0:
        raise ValueError("tire slip angles are undefined at vx = 0")
    delta = u.delta
    alpha_f = (lat.vy + params.lf * lat.r) / params.vx - delta
    alpha_r = (lat.vy - params.lr * lat.r) / params.vx
    fyf = -params.c1 * alpha_f
    fyr = -params.c2 * alpha_r
    # longitudinal tire forces are dropped along with aerodynamic drag
    fxf = fxr = 0.0
    fx = -fxf * math.cos(delta) - fyf * math.sin(delta) - fxr
    fy = fyf * math.cos(delta) - fxf * math.sin(delta) + fyr
    torque = params.lf * (fyf * math.cos(delta) - fxf * math.sin(delta)) - params.lr * fyr
    return TireState(alpha_f, alpha_r, fyf, fyr, fxf, fxr, fx, fy, torque)


def full_derivatives(
    params: VehicleParams,
    kin: KinematicState,
    lat: LateralState,
    u: ControlInput,
    textbook_kinematics: bool = False,
) -> tuple[float, float, float, float, float]:
    """Return (x_ddot, y_ddot, r_dot, X_dot, Y_dot).

    Body-frame velocities are ``x_dot = v cos(beta)`` and ``y_dot = v_y``; the
    yaw rate is ``lat.r``. ``Y_dot`` uses ``x_dot sin(psi) - y_dot cos(psi)``
    unless ``textbook_kinematics`` flips the second term to ``+``.
    """
    tires = tire_forces(params, lat, u)
    x_dot = kin.v * math.cos(kin.beta)
    y_dot = lat.vy
    psi_dot = lat.r
    x_ddot = psi_dot * y_dot + u.ax
    y_ddot = -psi_dot * x_dot + (2.0 / params.mass) * (tires.fyf * math.cos(u.delta) + tires.fyr)
    r_dot = (2.0 / params.iz) * (params.lf * tires.fyf - params.lr * tires.fyr)
    X_dot = x_dot * math.cos(kin.psi) - y_dot * math.sin(kin.psi)
    sign = 1.0 if textbook_kinematics else -1.0
    Y_dot = x_dot * math.sin(kin.psi) + sign * y_dot * math.cos(kin.psi)
    return x_ddot, y_ddot, r_dot, X_dot, Y_dot


def system_matrices(params: VehicleParams, convention: str = AS_PRINTED) -> StateSpace:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    m, lf, lr, iz, vx = params.mass, params.lf, params.lr, params.iz, params.vx
    cf, cr = params.c1, params.c2
    if vx == 0:
        raise ValueError("system matrices are undefined at vx = 0")
    a = (cf + cr) / (m * vx)
    b = (lf * cf - lr * cr) / (m * vx**2)
    c = (lf * cf - lr * cr) / iz
    if convention == AS_PRINTED:
        d = (lf**2 * cf - lr**2 * cr) / (iz * vx)
    else:
        d = (lf**2 * cf + lr**2 * cr) / (iz * vx)
    e = -cf / (m * vx)
    f = -lf * cf / iz
    return StateSpace(a, b, c, d, e, f, convention)


SystemLike = Union[VehicleParams, StateSpace, DynamicsConfig]


def as_state_space(model: SystemLike) -> StateSpace:
    if isinstance(model, StateSpace):
        return model
    if isinstance(model, DynamicsConfig):
        return model.state_space()
    if isinstance(model, VehicleParams):
        return system_matrices(model)
    raise TypeError(f"cannot build a lateral model from {type(model).__name__}")


def f_state(model: SystemLike, state, delta) -> np.ndarray:
    """Lateral state derivative for ``state = [v_y, r]``."""
    ss = as_state_space(model)
    state = np.asarray(state, dtype=float)
    return ss.matrix @ state + ss.input * float(delta)


def predict_next_state(model: SystemLike, lat: LateralState, u, dt: float) -> LateralState:
    """One explicit-Euler step of the lateral model.

    ``u`` may be a :class:`ControlInput` or a bare steering angle.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    delta = u.delta if isinstance(u, ControlInput) else float(u)
    ss = as_state_space(model)
    vy_dot, r_dot = ss.derivatives(lat.vy, lat.r, delta)
    return LateralState(lat.vy + dt * vy_dot, lat.r + dt * r_dot)


def predict_next_states(model: SystemLike, vy, r, delta, dt):
    """Array form of :func:`predict_next_state`; returns (vy_next, r_next)."""
    ss = as_state_space(model)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("all time steps must be positive")
    vy_dot, r_dot = ss.derivatives(np.asarray(vy, float), np.asarray(r, float), np.asarray(delta, float))
    return vy + dt * vy_dot, r + dt * r_dot
