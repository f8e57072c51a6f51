"""Comparison controller: constant-velocity Kalman tracker plus PID pursuit-and-descend."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator

from padfall.env import ACTION_SCALE
from padfall.errors import FilterDivergenceError
from padfall.seeding import episode_stream


@dataclass(frozen=True)
class EkfModel:
    """``dt_factor = 1`` reproduces the unit-step transition matrix exactly."""

    dt_factor: float = 1.0 / 30.0

    @property
    def A(self) -> np.ndarray:
        A = np.eye(6)
        A[0:3, 3:6] = np.eye(3) * self.dt_factor
        return A

    @property
    def H(self) -> np.ndarray:
        return np.hstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True)
class EkfState:
    x: np.ndarray
    P: np.ndarray
    process_variance: np.ndarray = field(default_factory=lambda: np.array([1e-6] * 6))
    measurement_variance: np.ndarray = field(default_factory=lambda: np.full(3, 1e-4))

    @classmethod
    def initial(cls, position, velocity=(0.0, 0.0, 0.0), position_var: float = 1e-2, velocity_var: float = 1.0,
                process_variance=None, measurement_variance=None) -> "EkfState":
        x = np.concatenate([np.asarray(position, float), np.asarray(velocity, float)])
        P = np.diag([position_var] * 3 + [velocity_var] * 3)
        kwargs = {}
        if process_variance is not None:
            kwargs["process_variance"] = np.asarray(process_variance, float)
        if measurement_variance is not None:
            kwargs["measurement_variance"] = np.asarray(measurement_variance, float)
        return cls(x, P, **kwargs)


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def ekf_predict(state: EkfState, model: EkfModel) -> EkfState:
    A = model.A
    x = A @ state.x
    P = _sym(A @ state.P @ A.T + np.diag(state.process_variance))
    return EkfState(x, P, state.process_variance, state.measurement_variance)


def ekf_update(state: EkfState, measurement, model: EkfModel) -> EkfState:
    z = np.asarray(measurement, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("measurement must be finite")
    H = model.H
    S = H @ state.P @ H.T + np.diag(state.measurement_variance)
    try:
        factor = cho_factor(_sym(S))
    except LinAlgError as exc:
        raise FilterDivergenceError("innovation covariance is not positive definite") from exc
    # K = P H^T S^-1, solved rather than inverted.
    K = cho_solve(factor, H @ state.P).T
    x = state.x + K @ (z - H @ state.x)
    P = _sym((np.eye(6) - K @ H) @ state.P)
    return EkfState(x, P, state.process_variance, state.measurement_variance)


@dataclass(frozen=True)
class BaselineConfig:
    kp: float = 1.0
    ki: float = 0.1
    kd: float = 0.05
    integral_limit: float = 0.5
    lookahead_horizon: float = 0.5
    descend_trigger_radius: float = 0.15
    descent_rate: float = 0.3
    measurement_noise_std: float = 0.01
    process_variance: tuple = (1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6)
    measurement_variance: tuple = (1e-4, 1e-4, 1e-4)


@dataclass
class PursuitMemory:
    z_setpoint: float
    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    previous_error: np.ndarray | None = None


def baseline_action(drone, ekf: EkfState, cfg: BaselineConfig, memory: PursuitMemory,
                    control_period: float = 1.0 / 30.0) -> np.ndarray:
    """Next position setpoint.

    Horizontal: PID on the error to the pad position predicted
    ``lookahead_horizon`` ahead. Vertical: hold until the horizontal error drops
    below ``descend_trigger_radius``, then lower the setpoint at ``descent_rate``.
    The offset from the current position is clipped to the same 0.1 m per-axis
    envelope the learned agent gets. ``memory`` is updated in place.
    """
    target = ekf.x[:3] + ekf.x[3:] * cfg.lookahead_horizon
    pos = drone.position
    error = target[:2] - pos[:2]
    memory.integral = np.clip(memory.integral + error * control_period, -cfg.integral_limit, cfg.integral_limit)
    deriv = np.zeros(2) if memory.previous_error is None else (error - memory.previous_error) / control_period
    memory.previous_error = error
    offset_xy = np.clip(cfg.kp * error + cfg.ki * memory.integral + cfg.kd * deriv, -ACTION_SCALE, ACTION_SCALE)
    if math.hypot(*error) < cfg.descend_trigger_radius:
        memory.z_setpoint = max(memory.z_setpoint - cfg.descent_rate * control_period, pos[2] - ACTION_SCALE)
    z_offset = float(np.clip(memory.z_setpoint - pos[2], -ACTION_SCALE, ACTION_SCALE))
    return np.array([pos[0] + offset_xy[0], pos[1] + offset_xy[1], pos[2] + z_offset])


class EkfPidBaseline(BaseEstimator):
    """Controller object for the evaluation harness.

    Measures the pad position with Gaussian noise drawn from the episode's
    ``sensor`` stream, filters it, and emits the pursuit setpoint as an action.
    """

    name = "ekf-baseline"

    def __init__(self, kp=1.0, ki=0.1, kd=0.05, lookahead_horizon=0.5, descend_trigger_radius=0.15,
                 descent_rate=0.3, measurement_noise_std=0.01, dt_factor=None, integral_limit=0.5,
                 process_variance=(1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6), measurement_variance=(1e-4, 1e-4, 1e-4)):
        self.kp = kp
        self.ki = ki
        self.kd = kd
        self.integral_limit = integral_limit
        self.process_variance = process_variance
        self.measurement_variance = measurement_variance
        self.lookahead_horizon = lookahead_horizon
        self.descend_trigger_radius = descend_trigger_radius
        self.descent_rate = descent_rate
        self.measurement_noise_std = measurement_noise_std
        self.dt_factor = dt_factor

    @classmethod
    def from_config(cls, cfg: BaselineConfig, dt_factor=None) -> "EkfPidBaseline":
        return cls(dt_factor=dt_factor, **{f.name: getattr(cfg, f.name) for f in fields(BaselineConfig)})

    def config(self) -> BaselineConfig:
        return BaselineConfig(kp=self.kp, ki=self.ki, kd=self.kd, integral_limit=self.integral_limit,
                              lookahead_horizon=self.lookahead_horizon,
                              descend_trigger_radius=self.descend_trigger_radius, descent_rate=self.descent_rate,
                              measurement_noise_std=self.measurement_noise_std,
                              process_variance=tuple(self.process_variance),
                              measurement_variance=tuple(self.measurement_variance))

    def reset(self, env, master_seed: int, episode_index: int) -> None:
        cfg = self.config()
        self._cfg = cfg
        self._period = env.sim_config.control_period
        self._model = EkfModel(self._period if self.dt_factor is None else self.dt_factor)
        self._rng = episode_stream(master_seed, episode_index, "sensor")
        first = self._measure(env)
        self.filter_ = EkfState.initial(first, process_variance=cfg.process_variance,
                                        measurement_variance=cfg.measurement_variance)
        self.memory_ = PursuitMemory(z_setpoint=float(env.state.drone.position[2]))

    def _measure(self, env) -> np.ndarray:
        return env.state.pad.position + self._rng.normal(0.0, self._cfg.measurement_noise_std, size=3)

    def act(self, env, obs=None) -> np.ndarray:
        self.filter_ = ekf_update(ekf_predict(self.filter_, self._model), self._measure(env), self._model)
        drone = env.state.drone
        setpoint = baseline_action(drone, self.filter_, self._cfg, self.memory_, self._period)
        return np.clip((setpoint - drone.position) / ACTION_SCALE, -1.0, 1.0)
