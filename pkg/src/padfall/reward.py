"""Branched potential-field landing reward.

Far from the pad the reward is a constant penalty; in the mid band it rewards
progress toward the pad; close in it penalises the attractive/repulsive
potential, unsafe altitude or edge proximity, and excess speed. Every branch
goes through ``tanh`` so the reward lies in (-1, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from padfall.errors import ConfigError, SingularInputError


@dataclass(frozen=True)
class RewardParams:
    gamma: float = -1.0
    alpha: float = 1.0
    beta_penalty: float = 1.0
    zeta: float = 1.0
    eta: float = 1.0
    q_max: float = 0.5
    far_threshold: float = 2.0
    near_threshold: float = 0.1
    speed_coeff: float = 0.5
    edge_margin: float = 0.05
    # "progress": previous minus current distance. "literal": the degenerate
    # same-quantity difference, which is identically zero.
    shaping_mode: str = "progress"

    def __post_init__(self):
        if not self.far_threshold > self.near_threshold > 0:
            raise ConfigError("need far_threshold > near_threshold > 0")
        if not self.q_max > 0:
            raise ConfigError("q_max must be > 0")
        if self.zeta < 0 or self.eta < 0:
            raise ConfigError("zeta and eta must be >= 0")
        if self.shaping_mode not in ("progress", "literal"):
            raise ConfigError("shaping_mode must be 'progress' or 'literal'")


@dataclass(frozen=True)
class RewardContext:
    current_distance: float
    previous_distance: float
    nearest_obstacle_distance: float = math.inf
    relative_velocity: tuple = (0.0, 0.0, 0.0)
    drone_below_pad_surface: bool = False
    near_pad_edge: bool = False


def attractive_potential(distance: float, zeta: float) -> float:
    return 0.5 * zeta * distance * distance


def repulsive_potential(sigma: float, eta: float, q_max: float) -> float:
    if sigma <= 0.0:
        raise SingularInputError("obstacle contact: distance to nearest obstacle is zero")
    if sigma >= q_max:
        return 0.0
    gap = 1.0 / sigma - 1.0 / q_max
    return 0.5 * eta * gap * gap


def speed_term(relative_velocity, speed_coeff: float) -> float:
    """Penalty on horizontal relative speed and on rising relative to the pad.

    ``relative_velocity`` is drone minus pad; closing the vertical gap (negative
    z) is free.
    """
    vx, vy, vz = (float(v) for v in relative_velocity)
    return -speed_coeff * (math.hypot(vx, vy) + max(0.0, vz))


def compute_reward(ctx: RewardContext, params: RewardParams) -> float:
    R = ctx.current_distance
    if R > params.far_threshold:
        return math.tanh(params.gamma)
    if params.near_threshold < R <= params.far_threshold:
        if params.shaping_mode == "literal":
            return math.tanh(params.alpha * (R - R))
        return math.tanh(params.alpha * (ctx.previous_distance - R))
    potential = attractive_potential(R, params.zeta) + repulsive_potential(
        ctx.nearest_obstacle_distance, params.eta, params.q_max
    )
    delta = speed_term(ctx.relative_velocity, params.speed_coeff)
    if R < params.near_threshold:
        unsafe = ctx.drone_below_pad_surface or ctx.near_pad_edge
        beta = params.beta_penalty if unsafe else 0.0
        return math.tanh(-potential - beta + delta)
    return math.tanh(-potential + delta)


def reward_grid(params: RewardParams, extent: float = 2.5, resolution: int = 101, plane: str = "xy",
                height: float = 0.0) -> tuple:
    """Reward at zero velocity over a square grid centred on the pad.

    ``previous_distance`` equals the current distance (a hovering drone), so the
    mid band reads zero and the plot shows the potential well and the far-field
    penalty. Returns ``(axis_values, grid)`` with ``grid[i, j]`` at
    ``(axis[j], axis[i])``.
    """
    if plane not in ("xy", "xz"):
        raise ConfigError("plane must be 'xy' or 'xz'")
    if not (math.isfinite(extent) and extent > 0):
        raise ConfigError("grid extent must be finite and positive")
    axis = np.linspace(-extent, extent, resolution)
    grid = np.empty((resolution, resolution))
    for i, b in enumerate(axis):
        for j, a in enumerate(axis):
            offset = (a, b, height) if plane == "xy" else (a, 0.0, b)
            R = math.sqrt(sum(c * c for c in offset))
            below = plane == "xz" and b < 0
            grid[i, j] = compute_reward(RewardContext(R, R, drone_below_pad_surface=below), params)
    return axis, grid


def export_reward_landscape(params: RewardParams, path, extent: float = 2.5, resolution: int = 101,
                            plane: str = "xy", svg_path=None) -> np.ndarray:
    """Write the landscape as ``x,y,reward`` CSV (and optionally an SVG heatmap)."""
    axis, grid = reward_grid(params, extent, resolution, plane)
    lines = ["x,y,reward"] if plane == "xy" else ["x,z,reward"]
    for i, b in enumerate(axis):
        for j, a in enumerate(axis):
            lines.append(f"{a:.6f},{b:.6f},{grid[i, j]:.9f}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if svg_path is not None:
        from padfall.plotting import heatmap_svg

        with open(svg_path, "w", newline="\n") as fh:
            fh.write(heatmap_svg(axis, grid, title=f"Reward landscape ({plane})"))
    return grid
