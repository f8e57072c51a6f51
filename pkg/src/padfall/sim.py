"""Fixed-timestep rigid-body quadrotor with a PID position loop.

The vehicle is a point mass carrying a thrust vector whose direction follows a
first-order attitude response. A per-axis PID converts position error into a
desired thrust and desired roll/pitch (small-angle mapping), which is what the
Crazyflie onboard controller does for position setpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from padfall.errors import ConfigError, StateCorruptionError

GRAVITY = 9.81


def wrap_angle(angle):
    """Wrap to ``[-pi, pi)``.

    Odd multiples of pi map to ``-pi``. Works elementwise on arrays.
    """
    return (np.asarray(angle) + np.pi) % (2.0 * np.pi) - np.pi if np.ndim(angle) else (
        (float(angle) + math.pi) % (2.0 * math.pi) - math.pi
    )


def _vec(values, name: str, n: int = 3) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have {n} components, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class PidGains:
    """Per-axis position-loop gains in force units (N/m, N/(m*s), N*s/m)."""

    kp: tuple = (0.378, 0.378, 0.378)
    ki: tuple = (0.027, 0.027, 0.027)
    kd: tuple = (0.12, 0.12, 0.135)
    integrator_limit: float = 0.5

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            object.__setattr__(self, name, tuple(float(v) for v in _vec(getattr(self, name), name)))
        if not all(math.isfinite(v) for v in (*self.kp, *self.ki, *self.kd, self.integrator_limit)):
            raise ConfigError("PID gains must be finite")
        if self.integrator_limit < 0:
            raise ConfigError("integrator_limit must be >= 0")


@dataclass(frozen=True)
class DroneParams:
    mass: float = 0.027
    inertia_diag: tuple = (1.4e-5, 1.4e-5, 2.17e-5)
    max_total_thrust: float = 0.60
    linear_drag_coeff: tuple = (0.0, 0.0, 0.0)
    attitude_time_constant: float = 0.05
    pid_gains: PidGains = field(default_factory=PidGains)
    max_tilt: float = 0.35
    # False freezes the attitude at its current value (thrust stays body-vertical).
    attitude_loop: bool = True

    def __post_init__(self):
        object.__setattr__(self, "inertia_diag", tuple(float(v) for v in _vec(self.inertia_diag, "inertia_diag")))
        object.__setattr__(
            self, "linear_drag_coeff", tuple(float(v) for v in _vec(self.linear_drag_coeff, "linear_drag_coeff"))
        )
        if isinstance(self.pid_gains, dict):
            object.__setattr__(self, "pid_gains", PidGains(**self.pid_gains))

    def validate(self, gravity: float = GRAVITY) -> "DroneParams":
        """Check physical invariants; hover feasibility is only enforced here."""
        if not self.mass > 0:
            raise ConfigError("mass must be > 0")
        if not all(v > 0 for v in self.inertia_diag):
            raise ConfigError("inertia components must be > 0")
        if not self.max_total_thrust > self.mass * gravity:
            raise ConfigError(
                f"max_total_thrust {self.max_total_thrust} N cannot hover a {self.mass} kg vehicle"
            )
        if not self.attitude_time_constant > 0:
            raise ConfigError("attitude_time_constant must be > 0")
        if any(v < 0 for v in self.linear_drag_coeff):
            raise ConfigError("linear_drag_coeff must be >= 0")
        return self


@dataclass(frozen=True)
class SimConfig:
    physics_dt: float = 1.0 / 240.0
    control_period: float = 1.0 / 30.0
    gravity: float = GRAVITY
    world_bounds: tuple = ((-5.0, -5.0, -1.0), (5.0, 5.0, 5.0))
    ground_effect: bool = False
    ground_effect_gain: float = 0.5
    prop_radius: float = 0.0231
    ground_effect_height: float = 0.1

    def __post_init__(self):
        lo, hi = (tuple(float(v) for v in _vec(b, "world_bounds")) for b in self.world_bounds)
        object.__setattr__(self, "world_bounds", (lo, hi))
        if not self.physics_dt > 0:
            raise ConfigError("physics_dt must be > 0")
        ratio = self.control_period / self.physics_dt
        if not (self.control_period > 0 and abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1):
            raise ConfigError("control_period must be an integer multiple of physics_dt")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("world_bounds lower corner must be below upper corner")

    @property
    def substeps(self) -> int:
        return int(round(self.control_period / self.physics_dt))

    def clamp_to_bounds(self, point) -> np.ndarray:
        lo, hi = self.world_bounds
        return np.minimum(np.maximum(np.asarray(point, dtype=np.float64), lo), hi)


@dataclass(frozen=True)
class DroneState:
    """Rigid-body state plus the position-loop integrator memory."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    integrator: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def at_rest(cls, position) -> "DroneState":
        return cls(position=np.array(position, dtype=np.float64))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.attitude, self.angular_velocity])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.as_vector()).all() and np.isfinite(self.integrator).all())


def pid_position_step(state: DroneState, setpoint, gains: PidGains, dt: float, integrator, mass: float,
                      gravity: float = GRAVITY, max_tilt: float = 0.35):
    """One PID evaluation on position error.

    Returns ``(desired_thrust, desired_attitude, new_integrator)``. The derivative
    acts on measured velocity so setpoint jumps do not kick the output. Horizontal
    force demands become roll/pitch through the small-angle thrust-vector map,
    rotated by the current yaw; desired yaw is always zero.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    kp = np.asarray(gains.kp)
    ki = np.asarray(gains.ki)
    kd = np.asarray(gains.kd)
    error = np.asarray(setpoint, dtype=np.float64) - state.position
    lim = gains.integrator_limit
    new_integrator = np.clip(np.asarray(integrator, dtype=np.float64) + error * dt, -lim, lim)
    force = kp * error + ki * new_integrator - kd * state.velocity

    hover = mass * gravity
    # zero-g test worlds: treat unit weight so the tilt map stays finite
    scale = hover if hover > 0 else 1.0
    yaw = state.attitude[2]
    cy, sy = math.cos(yaw), math.sin(yaw)
    pitch = (force[0] * cy + force[1] * sy) / scale
    roll = (force[0] * sy - force[1] * cy) / scale
    pitch = min(max(pitch, -max_tilt), max_tilt)
    roll = min(max(roll, -max_tilt), max_tilt)
    thrust = (hover + force[2]) / (math.cos(roll) * math.cos(pitch))
    return thrust, np.array([roll, pitch, 0.0]), new_integrator


def ground_effect_multiplier(height: float | None, cfg: SimConfig) -> float:
    if not cfg.ground_effect or height is None or height >= cfg.ground_effect_height or height < -0.05:
        return 1.0
    h = max(height, 0.01)
    return 1.0 + cfg.ground_effect_gain * (cfg.prop_radius / (4.0 * h)) ** 2


def step_physics(state: DroneState, commanded_setpoint, external_force, params: DroneParams,
                 cfg: SimConfig, surface_height: float | None = None) -> DroneState:
    """Advance one ``physics_dt`` with semi-implicit Euler.

    ``surface_height`` is the drone's height above a surface directly below it
    (the pad); it only matters when ground effect is enabled.
    """
    setpoint = np.asarray(commanded_setpoint, dtype=np.float64)
    force_ext = np.asarray(external_force, dtype=np.float64)
    if not (state.is_finite() and np.isfinite(setpoint).all() and np.isfinite(force_ext).all()):
        raise StateCorruptionError(f"non-finite input to step_physics: state={state}, setpoint={setpoint}")
    setpoint = cfg.clamp_to_bounds(setpoint)
    dt = cfg.physics_dt

    thrust, desired_att, integrator = pid_position_step(
        state, setpoint, params.pid_gains, dt, state.integrator, params.mass, cfg.gravity, params.max_tilt
    )
    thrust = min(max(thrust, 0.0), params.max_total_thrust)
    thrust *= ground_effect_multiplier(surface_height, cfg)

    if params.attitude_loop:
        rate = (desired_att - state.attitude) / params.attitude_time_constant
        rate[2] = wrap_angle(desired_att[2] - state.attitude[2]) / params.attitude_time_constant
        attitude = wrap_angle(state.attitude + rate * dt)
    else:
        rate = np.zeros(3)
        attitude = state.attitude.copy()

    roll, pitch, yaw = attitude
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    body_z = np.array([cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp])

    drag = np.asarray(params.linear_drag_coeff) * state.velocity
    accel = (thrust * body_z + force_ext - drag) / params.mass
    accel[2] -= cfg.gravity
    velocity = state.velocity + accel * dt
    position = state.position + velocity * dt
    return DroneState(position, velocity, attitude, rate, integrator)


def with_position(state: DroneState, position) -> DroneState:
    return replace(state, position=np.array(position, dtype=np.float64))
