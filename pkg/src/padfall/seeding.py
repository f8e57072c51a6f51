"""Seed stream derivation.

Every random draw in the package comes from a ``numpy.random.Generator`` built
from ``(master_seed, episode_index, purpose)``, so rollouts never share state and
the result of an episode does not depend on which worker ran it.
"""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("spawn", "wind", "trajectory", "sensor", "learner", "explore", "init")


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("ascii"))


def stream(master_seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for ``(master_seed, *keys)``; strings are hashed."""
    spawn_key = tuple(_tag(k) if isinstance(k, str) else int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=spawn_key)))


def episode_stream(master_seed: int, episode_index: int, purpose: str) -> np.random.Generator:
    return stream(master_seed, episode_index, purpose)
