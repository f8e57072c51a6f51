import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from padfall.errors import ConfigError
from padfall.platform import MAX_PAD_SPEED, PadState, TrajectorySpec, pad_frame_offset, pad_state_at
from padfall.seeding import stream

KINDS_MOVING = {
    "linear": dict(kind="linear", speed=0.2),
    "curved": dict(kind="curved", speed=0.2),
    "complex3d": dict(kind="complex3d", speed=0.15),
    "fast_linear": dict(kind="linear", speed=0.46, direction_change_interval=1.0),
}


def test_static_pad():
    spec = TrajectorySpec(origin=(0.2, -0.1, 0.0))
    for t in (0.0, 1.0, 17.3):
        pad = pad_state_at(spec, t)
        assert np.array_equal(pad.position, [0.2, -0.1, 0.0])
        assert np.array_equal(pad.velocity, np.zeros(3))


def test_linear_within_segment_is_exact():
    spec = TrajectorySpec(kind="linear", seed=4, speed=0.3)
    t1, t2 = 3.2, 5.7  # both inside [3, 6)
    a, b = pad_state_at(spec, t1), pad_state_at(spec, t2)
    assert np.allclose(b.position - a.position, a.velocity * (t2 - t1), atol=1e-12)
    assert np.array_equal(a.velocity, b.velocity)


def test_linear_boundaries_keep_speed_and_change_heading():
    changed = 0
    for seed in range(100):
        spec = TrajectorySpec(kind="linear", seed=seed, speed=0.25)
        for k in range(1, 11):
            t = k * spec.direction_change_interval
            before = pad_state_at(spec, t - 1e-6)
            after = pad_state_at(spec, t)
            assert np.linalg.norm(before.velocity) == pytest.approx(0.25, abs=1e-12)
            assert np.linalg.norm(after.velocity) == pytest.approx(0.25, abs=1e-12)
            changed += not np.allclose(before.velocity, after.velocity)
            # position continuous across the change
            assert np.linalg.norm(after.position - before.position) < 1e-6
    assert changed == 1000


@pytest.mark.parametrize("name", sorted(KINDS_MOVING))
def test_continuity_speed_bound_and_containment(name):
    rng = stream(7, "platform-test", name)
    dt = 1 / 240
    for seed in range(20):
        spec = TrajectorySpec(seed=seed, **KINDS_MOVING[name])
        lo, hi = map(np.array, spec.waypoint_region)
        for t in rng.uniform(0, 60, size=50):
            a, b = pad_state_at(spec, t), pad_state_at(spec, t + dt)
            assert np.linalg.norm(b.position - a.position) <= (MAX_PAD_SPEED + 1e-6) * dt
            assert np.linalg.norm(a.velocity) <= MAX_PAD_SPEED + 1e-12
            assert np.all(a.position >= lo) and np.all(a.position <= hi)


def test_region_containment_bulk():
    rng = stream(11, "containment")
    lo = hi = None
    for i in range(100_000 // 50):
        spec = TrajectorySpec(kind=("linear", "curved", "complex3d")[i % 3], seed=i,
                              speed=0.15 if i % 3 == 2 else 0.3)
        lo, hi = map(np.array, spec.waypoint_region)
        for t in rng.uniform(0, 30, size=50):
            p = pad_state_at(spec, t).position
            assert np.all(p >= lo) and np.all(p <= hi)


def test_curved_has_constant_speed_and_turning_heading():
    spec = TrajectorySpec(kind="curved", seed=3, speed=0.2)
    a, b = pad_state_at(spec, 0.5), pad_state_at(spec, 2.5)
    assert np.linalg.norm(a.velocity) == pytest.approx(0.2)
    assert np.linalg.norm(b.velocity) == pytest.approx(0.2)
    assert not np.allclose(a.velocity, b.velocity)


def test_complex3d_vertical_motion_is_bounded():
    spec = TrajectorySpec(kind="complex3d", seed=5, speed=0.15)
    zs = [pad_state_at(spec, t).position[2] for t in np.linspace(0, 12, 400)]
    assert max(zs) <= spec.z_amplitude + 1e-12
    assert min(zs) >= -spec.z_amplitude - 1e-12
    assert max(zs) - min(zs) > 0.25


@given(st.integers(0, 10_000), st.floats(0, 100))
def test_pad_state_is_pure(seed, t):
    spec = TrajectorySpec(kind="curved", seed=seed, speed=0.2)
    a, b = pad_state_at(spec, t), pad_state_at(spec, t)
    assert np.array_equal(a.position, b.position) and np.array_equal(a.velocity, b.velocity)


def test_spec_validation():
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="zigzag")
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="linear", speed=0.5)
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="linear", speed=0.2, direction_change_interval=0)
    with pytest.raises(ValueError):
        pad_state_at(TrajectorySpec(), -1.0)


def test_pad_frame_offset_examples():
    pad = PadState(np.zeros(3), np.zeros(3))
    d, placeholder = pad_frame_offset(np.zeros(3), pad)
    assert np.array_equal(d, np.zeros(3)) and placeholder is None
    d, _ = pad_frame_offset((1.0, 0.0, 0.0), pad)
    assert np.array_equal(d, [-1.0, 0.0, 0.0])


def test_pad_frame_offset_matches_subtraction_oracle():
    rng = stream(0, "offset-oracle")
    for _ in range(1000):
        drone, pad_pos = rng.normal(size=3), rng.normal(size=3)
        d, _ = pad_frame_offset(drone, PadState(pad_pos, np.zeros(3)))
        expected = [pad_pos[i] - drone[i] for i in range(3)]
        assert d.tolist() == expected


def test_speed_bound_applies_to_complex3d_total_speed():
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="complex3d", speed=0.45)
    spec = TrajectorySpec(kind="complex3d", speed=0.15)
    vz = spec.z_amplitude * 2 * math.pi / spec.z_period
    assert math.hypot(0.15, vz) <= MAX_PAD_SPEED
