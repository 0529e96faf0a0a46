"""Synthetic AVP-schema telemetry from the bicycle model, with depth-camera blinding.

The simulated car follows a steering program through the lateral model and
a desired-speed program through a proportional throttle law. A depth
reading reports the nearest obstacle (or the lab background); when it drops
below the braking distance the desired speed becomes zero.

Blinding is modeled in two places. ``run_scenario(..., blinding=attack)``
makes the car's controller blind during the laser intervals, so it does not
brake. ``inject_attack`` then corrupts the logged depth readings, labels the
affected frames and emits the laser log.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from os import PathLike
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_continuous_are

from .data import Label, LaserLog, TelemetryFrame, columns_to_frames
from .dynamics import (
    DynamicsConfig,
    StateSpace,
    VehicleParams,
    dynamics_config_from_mapping,
    sideslip,
)

DEFAULT_NOISE = {
    "longitudinal_speed": 0.01,
    "lateral_speed": 0.01,
    "measured_speed": 0.01,
    "yaw_rate": 0.005,
    "obstacle_distance": 0.02,
}
NOISY_CHANNELS = (
    "desired_speed", "longitudinal_speed", "lateral_speed", "measured_speed",
    "obstacle_distance", "steering_angle", "yaw_angle", "yaw_rate", "throttle",
)
EFFECT_MODES = ("dropout", "frozen", "noise-burst")
_EPS = 1e-9


@dataclass(frozen=True)
class SteeringSegment:
    """One piece of the steering program, active from ``start`` until the next segment.

    kinds: ``constant`` (``value``), ``step`` (``before`` until ``step_time``,
    then ``value``), ``sinusoid`` (``value + amplitude*sin(2*pi*frequency*t + phase)``).
    """

    start: float = 0.0
    kind: str = "constant"
    value: float = 0.0
    before: float = 0.0
    step_time: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "step", "sinusoid"):
            raise ValueError(f"unknown steering segment kind {self.kind!r}")

    def at(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "step":
            return self.value if t >= self.step_time - _EPS else self.before
        return self.value + self.amplitude * math.sin(2 * math.pi * self.frequency * t + self.phase)


@dataclass(frozen=True)
class Obstacle:
    appear: float
    distance: float
    closing_speed: float = 0.0
    duration: float = math.inf

    def __post_init__(self):
        if self.distance < 0 or self.duration <= 0:
            raise ValueError("obstacle distance must be >= 0 and duration > 0")


@dataclass(frozen=True)
class Scenario:
    duration: float = 10.0
    dt: float = 0.01
    steering: tuple = (SteeringSegment(),)
    speed: tuple = ((0.0, 1.0),)  # (start time, desired speed) pairs
    obstacles: tuple = ()
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    seed: int = 0
    braking_distance: float = 0.5
    max_range: float = 10.0
    background_distance: float = 4.0
    kp: float = 50.0
    accel_gain: float = 2.0
    lateral_feedback: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("scenario dt must be positive")
        if self.duration < self.dt:
            raise ValueError("scenario duration must be at least one time step")
        for channel, std in self.noise.items():
            if channel not in NOISY_CHANNELS:
                raise ValueError(f"unknown noise channel {channel!r}")
            if std < 0:
                raise ValueError(f"noise std for {channel} must be non-negative")
        if not self.steering:
            raise ValueError("steering program needs at least one segment")
        if not self.speed:
            raise ValueError("desired-speed program needs at least one segment")
        if any(v < 0 for _, v in self.speed):
            raise ValueError("desired speeds must be non-negative")
        if not 0 < self.background_distance <= self.max_range:
            raise ValueError("background distance must lie in (0, max_range]")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def time_constant(self) -> float:
        """Time constant of the closed speed loop, in seconds."""
        return 100.0 / (self.kp * self.accel_gain)

    def steering_at(self, t: float) -> float:
        seg = self.steering[0]
        for s in self.steering:
            if t >= s.start - _EPS:
                seg = s
        return seg.at(t)

    def desired_speed_at(self, t: float) -> float:
        v = self.speed[0][1]
        for start, speed in self.speed:
            if t >= start - _EPS:
                v = speed
        return v


@dataclass(frozen=True)
class AttackScript:
    intervals: tuple = ()
    mode: str = "dropout"
    noise_std: float = 0.5
    max_range: float = 10.0

    def __post_init__(self):
        if self.mode not in EFFECT_MODES:
            raise ValueError(f"unknown blinding mode {self.mode!r}; expected one of {EFFECT_MODES}")
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for a, b in ivs:
            if b < a:
                raise ValueError(f"attack interval [{a}, {b}] ends before it starts")
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if a1 <= b0:
                raise ValueError(f"attack intervals [{a0}, {b0}] and [{a1}, {b1}] overlap")
        object.__setattr__(self, "intervals", ivs)

    def active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        on = np.zeros(t.shape, dtype=bool)
        for a, b in self.intervals:
            on |= (t >= a - _EPS) & (t <= b + _EPS)
        return on


def stabilizing_gain(ss: StateSpace) -> np.ndarray:
    """LQR state-feedback gain K (steering = reference + K @ [v_y, r]) for the lateral model."""
    A = ss.matrix
    B = ss.input.reshape(2, 1)
    P = solve_continuous_are(A, B, np.eye(2), np.eye(1))
    return -(B.T @ P).ravel()


def run_scenario(
    params: Union[VehicleParams, DynamicsConfig],
    scenario: Scenario,
    lateral: Optional[StateSpace] = None,
    blinding: Optional[AttackScript] = None,
) -> list[TelemetryFrame]:
    """Integrate the closed-loop vehicle with explicit Euler and log one frame per step.

    ``lateral`` overrides the lateral model derived from ``params``. With
    ``scenario.lateral_feedback`` the applied (and logged) steering adds an
    LQR correction so the lateral states stay bounded. Frames are labeled
    normal; pass ``blinding`` to suppress braking during laser intervals.
    """
    cfg = params if isinstance(params, DynamicsConfig) else DynamicsConfig(params=params, dt=scenario.dt)
    vp = cfg.params
    ss = lateral if lateral is not None else cfg.state_space()
    gain = stabilizing_gain(ss) if scenario.lateral_feedback else np.zeros(2)
    limit = cfg.steering_limit
    y_sign = 1.0 if cfg.textbook_kinematics else -1.0
    dt = scenario.dt
    n = scenario.n_steps
    rng = np.random.default_rng(scenario.seed)
    obstacles = sorted(scenario.obstacles, key=lambda o: o.appear)

    cols = {name: np.zeros(n) for name in NOISY_CHANNELS}
    cols["timestamp"] = np.round(np.arange(n) * dt, 10)
    cols["arm"] = np.ones(n)

    vx = vy = r = 0.0
    x = y = X = Y = psi = 0.0
    obstacle_d = {}
    for k in range(n):
        t = cols["timestamp"][k]
        # obstacle bookkeeping: true distance shrinks with our speed plus its own approach
        visible = []
        for i, ob in enumerate(obstacles):
            if ob.appear - _EPS <= t < ob.appear + ob.duration - _EPS:
                if i not in obstacle_d:
                    obstacle_d[i] = ob.distance
                visible.append(obstacle_d[i])
        true_reading = min(visible + [scenario.background_distance])
        true_reading = min(true_reading, scenario.max_range)
        d_meas = true_reading + rng.normal(0.0, scenario.noise.get("obstacle_distance", 0.0))
        d_meas = float(np.clip(d_meas, 0.0, scenario.max_range))
        blind = blinding is not None and bool(blinding.active(t))
        perceived = scenario.max_range if blind else d_meas

        v_des = scenario.desired_speed_at(t)
        if perceived < scenario.braking_distance:
            v_des = 0.0
        u_speed = scenario.kp * (v_des - vx)
        throttle = min(max(u_speed, 0.0), 100.0)
        accel = scenario.accel_gain * min(max(u_speed, -100.0), 100.0) / 100.0

        delta = scenario.steering_at(t) + float(gain @ (vy, r))
        delta = min(max(delta, -limit), limit)

        cols["desired_speed"][k] = v_des
        cols["longitudinal_speed"][k] = vx
        cols["lateral_speed"][k] = vy
        cols["measured_speed"][k] = math.hypot(vx, vy)
        cols["obstacle_distance"][k] = d_meas
        cols["steering_angle"][k] = delta
        cols["yaw_angle"][k] = psi
        cols["yaw_rate"][k] = r
        cols["throttle"][k] = throttle

        # Euler updates; state derivatives all evaluated at step k
        vy_dot, r_dot = ss.derivatives(vy, r, delta)
        beta = sideslip(delta, vp)
        x_dot = vx * math.cos(psi + beta)
        y_dot = vx * math.sin(psi + beta)
        psi_dot = vx / vp.lr * math.sin(beta)
        X_dot = vx * math.cos(psi) - vy * math.sin(psi)
        Y_dot = vx * math.sin(psi) + y_sign * vy * math.cos(psi)
        for i in list(obstacle_d):
            obstacle_d[i] = max(0.0, obstacle_d[i] - dt * (vx + obstacles[i].closing_speed))
        vy += dt * vy_dot
        r += dt * r_dot
        vx = max(0.0, vx + dt * accel)
        x += dt * x_dot
        y += dt * y_dot
        X += dt * X_dot
        Y += dt * Y_dot
        psi += dt * psi_dot

    for channel in NOISY_CHANNELS:
        std = scenario.noise.get(channel, 0.0)
        if std > 0 and channel != "obstacle_distance":
            cols[channel] = cols[channel] + rng.normal(0.0, std, n)
    for channel in ("longitudinal_speed", "measured_speed"):
        np.maximum(cols[channel], 0.0, out=cols[channel])
    np.clip(cols["throttle"], 0.0, 100.0, out=cols["throttle"])
    cols["label"] = np.zeros(n, dtype=np.int8)
    return columns_to_frames(cols)


def inject_attack(
    frames: Sequence[TelemetryFrame],
    attack: AttackScript,
    seed: int = 0,
) -> tuple[list[TelemetryFrame], LaserLog]:
    """Corrupt depth readings inside the laser intervals and label frames.

    Frames inside an interval (inclusive) are abnormal, all others normal.
    The returned laser log has one entry per frame timestamp.
    """
    if not frames:
        if attack.intervals:
            raise ValueError("attack intervals given for an empty recording")
        return [], LaserLog(np.empty(0), np.empty(0, dtype=np.int8))
    t = np.array([f.timestamp for f in frames])
    if np.any(np.diff(t) < 0):
        raise ValueError("frames must be time-sorted")
    for a, b in attack.intervals:
        if a < t[0] - _EPS or b > t[-1] + _EPS:
            raise ValueError(f"attack interval [{a}, {b}] lies outside the recording [{t[0]}, {t[-1]}]")
    on = attack.active(t)
    rng = np.random.default_rng(seed)
    out = []
    frozen_value = None
    for i, frame in enumerate(frames):
        if not on[i]:
            out.append(replace(frame, label=Label.NORMAL))
            frozen_value = None
            continue
        d = frame.obstacle_distance
        if attack.mode == "dropout":
            d = attack.max_range
        elif attack.mode == "frozen":
            if frozen_value is None:
                frozen_value = frames[i - 1].obstacle_distance if i > 0 else d
            d = frozen_value
        else:
            d = float(np.clip(d + rng.normal(0.0, attack.noise_std), 0.0, attack.max_range))
        out.append(replace(frame, obstacle_distance=d, label=Label.ABNORMAL))
    return out, LaserLog(t, on.astype(np.int8))


def simulate_attack(
    params: Union[VehicleParams, DynamicsConfig],
    scenario: Scenario,
    attack: AttackScript,
    lateral: Optional[StateSpace] = None,
) -> tuple[list[TelemetryFrame], LaserLog]:
    """Closed-loop attacked run: the car is blind during the intervals, then readings are corrupted."""
    frames = run_scenario(params, scenario, lateral=lateral, blinding=attack)
    return inject_attack(frames, attack, seed=scenario.seed + 1)


@dataclass(frozen=True)
class Recording:
    name: str
    frames: list
    log: LaserLog
    scenario: Scenario
    attack: Optional[AttackScript]


def benchmark_scenarios(
    n_frames: int = 20000,
    seed: int = 0,
    recording_seconds: float = 20.0,
    dt: float = 0.01,
    attack_share: float = 0.5,
) -> list[tuple[Scenario, Optional[AttackScript]]]:
    """Randomised driving scenarios; roughly ``attack_share`` of them carry a blinding attack.

    Each recording cruises with sinusoidal steering and meets obstacles that
    call for braking. Attacked recordings switch the laser on as the car
    approaches each obstacle.
    """
    rng = np.random.default_rng(seed)
    steps = int(round(recording_seconds / dt))
    n_rec = max(2, math.ceil(n_frames / steps))
    n_attack = max(1, int(round(n_rec * attack_share)))
    attacked = set(rng.choice(n_rec, size=n_attack, replace=False).tolist())
    out = []
    for i in range(n_rec):
        duration = min(recording_seconds, (n_frames - i * steps) * dt) if i == n_rec - 1 else recording_seconds
        duration = round(duration, 10)
        cruise = float(rng.uniform(0.6, 1.4))
        steering = (
            SteeringSegment(
                0.0, "sinusoid",
                amplitude=float(rng.uniform(0.03, 0.15)),
                frequency=float(rng.uniform(0.05, 0.4)),
                phase=float(rng.uniform(0, 2 * math.pi)),
            ),
        )
        speed = ((0.0, cruise), (duration / 2, float(rng.uniform(0.6, 1.4))))
        obstacles = []
        t_next = float(rng.uniform(1.0, 3.0))
        while t_next < duration - 2.0:
            hold = float(rng.uniform(3.0, 6.0))
            obstacles.append(Obstacle(t_next, float(rng.uniform(1.5, 3.5)), 0.0, hold))
            t_next += hold + float(rng.uniform(0.5, 2.0))
        scenario = Scenario(
            duration=duration,
            dt=dt,
            steering=steering,
            speed=speed,
            obstacles=tuple(obstacles),
            seed=int(rng.integers(0, 2**31 - 1)),
            background_distance=float(rng.uniform(3.5, 6.0)),
        )
        attack = None
        if i in attacked:
            t_end = (scenario.n_steps - 1) * dt
            intervals = []
            for ob in obstacles:
                a = ob.appear
                b = min(ob.appear + ob.duration - dt, t_end)
                if b > a:
                    intervals.append((round(a, 10), round(b, 10)))
            attack = AttackScript(tuple(intervals))
        out.append((scenario, attack))
    return out


def synthetic_benchmark(
    n_frames: int = 20000,
    seed: int = 0,
    params: Union[VehicleParams, DynamicsConfig, None] = None,
    **kwargs,
) -> list[Recording]:
    """Seeded labeled benchmark of about ``n_frames`` frames split over several recordings."""
    params = params or VehicleParams()
    recordings = []
    for i, (scenario, attack) in enumerate(benchmark_scenarios(n_frames, seed, **kwargs)):
        if attack is None:
            frames = run_scenario(params, scenario)
            frames, log = inject_attack(frames, AttackScript(), seed=scenario.seed + 1)
        else:
            frames, log = simulate_attack(params, scenario, attack)
        recordings.append(Recording(f"run{i:03d}", frames, log, scenario, attack))
    return recordings


# ---------------------------------------------------------------- config files


def _parse_bool(value: str) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _parse_intervals(text: str) -> tuple:
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        a, b = part.split(":") if ":" in part else part.split("-")
        out.append((float(a), float(b)))
    return tuple(out)


def _parse_program(text: str) -> tuple:
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if part:
            start, value = part.split(":")
            out.append((float(start), float(value)))
    return tuple(out)


def load_scenario(path: Union[str, PathLike]):
    """Read a scenario file; returns ``(DynamicsConfig, Scenario, AttackScript | None)``.

    Sections: ``[vehicle]``, ``[scenario]``, ``[steering.N]``, ``[speed]``
    (``program = start:speed, ...``), ``[obstacle.N]``, ``[noise]`` and an
    optional ``[attack]`` (``intervals = a:b, ...``, ``mode``, ``noise_std``).
    """
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return scenario_from_parser(parser)


def scenario_from_parser(parser: configparser.ConfigParser):
    dyn = dynamics_config_from_mapping(dict(parser.items("vehicle"))) if parser.has_section("vehicle") else DynamicsConfig()
    kw = {}
    if parser.has_section("scenario"):
        sec = parser["scenario"]
        floats = ("duration", "dt", "braking_distance", "max_range", "background_distance", "kp", "accel_gain")
        for key in sec:
            if key in floats:
                kw[key] = sec.getfloat(key)
            elif key == "seed":
                kw[key] = sec.getint(key)
            elif key == "lateral_feedback":
                kw[key] = _parse_bool(sec[key])
            else:
                raise ValueError(f"unknown [scenario] key {key!r}")
    steering = []
    obstacles = []
    for name in parser.sections():
        if name.startswith("steering"):
            sec = parser[name]
            steering.append(
                SteeringSegment(
                    start=sec.getfloat("start", 0.0),
                    kind=sec.get("kind", "constant"),
                    value=sec.getfloat("value", 0.0),
                    before=sec.getfloat("before", 0.0),
                    step_time=sec.getfloat("step_time", 0.0),
                    amplitude=sec.getfloat("amplitude", 0.0),
                    frequency=sec.getfloat("frequency", 0.0),
                    phase=sec.getfloat("phase", 0.0),
                )
            )
        elif name.startswith("obstacle"):
            sec = parser[name]
            obstacles.append(
                Obstacle(
                    appear=sec.getfloat("appear"),
                    distance=sec.getfloat("distance"),
                    closing_speed=sec.getfloat("closing_speed", 0.0),
                    duration=sec.getfloat("duration", math.inf),
                )
            )
    if steering:
        kw["steering"] = tuple(sorted(steering, key=lambda s: s.start))
    if obstacles:
        kw["obstacles"] = tuple(obstacles)
    if parser.has_section("speed"):
        kw["speed"] = _parse_program(parser["speed"]["program"])
    if parser.has_section("noise"):
        noise = dict(DEFAULT_NOISE)
        noise.update({k: float(v) for k, v in parser.items("noise")})
        kw["noise"] = noise
    scenario = Scenario(**kw)
    attack = None
    if parser.has_section("attack"):
        sec = parser["attack"]
        attack = AttackScript(
            intervals=_parse_intervals(sec.get("intervals", "")),
            mode=sec.get("mode", "dropout"),
            noise_std=sec.getfloat("noise_std", 0.5),
            max_range=sec.getfloat("max_range", scenario.max_range),
        )
    return dyn, scenario, attack
