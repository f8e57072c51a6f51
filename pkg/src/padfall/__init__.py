"""Quadrotor moving-platform landing lab: simulator, reward, TD3 learner, EKF baseline."""

from padfall.sim import DroneParams, DroneState, SimConfig, step_physics, wrap_angle
from padfall.platform import PadState, TrajectorySpec, pad_state_at
from padfall.env import LandingEnv
from padfall.td3 import TD3Config, TD3Lander
from padfall.baseline import EkfPidBaseline

__all__ = [
    "DroneParams",
    "DroneState",
    "EkfPidBaseline",
    "LandingEnv",
    "PadState",
    "SimConfig",
    "TD3Config",
    "TD3Lander",
    "TrajectorySpec",
    "pad_state_at",
    "step_physics",
    "wrap_angle",
]

__version__ = "0.1.0"
