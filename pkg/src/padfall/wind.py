"""Stochastic gusts and the impeller jet.

Gusts follow a two-level gate: an episode is windy with probability
``p_episode``; inside a windy episode each decision step carries a force with
probability ``p_step``. Forces are in newtons, world frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from padfall.errors import ConfigError

# Impeller level -> jet force at the mouth (N). Invented calibration.
IMPELLER_LEVELS = {4500: 0.02, 8500: 0.05}


@dataclass(frozen=True)
class GustConfig:
    p_episode: float = 0.2
    p_step: float = 0.2
    component_range: float = 0.005

    def __post_init__(self):
        if not (0.0 <= self.p_episode <= 1.0 and 0.0 <= self.p_step <= 1.0):
            raise ConfigError("gust probabilities must lie in [0, 1]")
        if not self.component_range >= 0:
            raise ConfigError("component_range must be >= 0")


def sample_episode_windiness(rng: np.random.Generator, p_episode: float = 0.2) -> bool:
    return bool(rng.random() < p_episode)


def gust_force_at_step(rng: np.random.Generator, windy: bool, cfg: GustConfig) -> np.ndarray:
    """Force for one decision step.

    The signed-magnitude composition of the gust law is just the uniform draw
    itself, so each active component is ``Uniform[-range, range]``. Non-windy
    episodes consume no randomness.
    """
    if not windy:
        return np.zeros(3)
    if rng.random() >= cfg.p_step:
        return np.zeros(3)
    return rng.uniform(-cfg.component_range, cfg.component_range, size=3)


@dataclass(frozen=True)
class ImpellerSpec:
    origin_offset: tuple = (0.3, 0.0, 0.05)
    magnitude: float = 0.02
    jet_radius: float = 0.15
    axial_falloff_length: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "origin_offset", tuple(float(v) for v in self.origin_offset))
        if not self.magnitude >= 0:
            raise ConfigError("impeller magnitude must be >= 0")
        if not self.jet_radius > 0:
            raise ConfigError("jet_radius must be > 0")
        if not self.axial_falloff_length > 0:
            raise ConfigError("axial_falloff_length must be > 0")
        if math.hypot(*self.origin_offset) == 0:
            raise ConfigError("impeller cannot sit at the pad center")

    @classmethod
    def from_rpm(cls, rpm: int, **kwargs) -> "ImpellerSpec":
        if rpm not in IMPELLER_LEVELS:
            raise ConfigError(f"no calibration for {rpm} rpm; known levels {sorted(IMPELLER_LEVELS)}")
        return cls(magnitude=IMPELLER_LEVELS[rpm], **kwargs)

    @property
    def aim(self) -> np.ndarray:
        offset = np.asarray(self.origin_offset)
        return -offset / np.linalg.norm(offset)


def impeller_position(pad_position, spec: ImpellerSpec) -> np.ndarray:
    return np.asarray(pad_position, dtype=np.float64) + np.asarray(spec.origin_offset)


def impeller_force(drone_position, pad, spec: ImpellerSpec) -> np.ndarray:
    """Jet force on the drone: exponential axial decay times Gaussian radial profile."""
    aim = spec.aim
    rel = np.asarray(drone_position, dtype=np.float64) - impeller_position(pad.position, spec)
    s = float(rel @ aim)
    if s < 0.0:
        return np.zeros(3)
    radial = rel - s * aim
    r2 = float(radial @ radial)
    scale = spec.magnitude * math.exp(-s / spec.axial_falloff_length) * math.exp(-r2 / spec.jet_radius**2)
    return scale * aim


@dataclass
class WindSchedule:
    """Lazily filled per-decision-step gust record for one episode."""

    episode_is_windy: bool
    cfg: GustConfig
    rng: np.random.Generator
    forces: list = field(default_factory=list)

    def next_force(self) -> np.ndarray:
        force = gust_force_at_step(self.rng, self.episode_is_windy, self.cfg)
        self.forces.append(force)
        return force
