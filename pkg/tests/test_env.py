import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from padfall.env import (
    EpisodeConfig,
    LandingEnv,
    NormalizationRanges,
    Observation,
    ObservationNormalizer,
    apply_action,
    build_observation,
    normalize_observation,
)
from padfall.errors import ConfigError, UsageError
from padfall.platform import PadState
from padfall.scenarios import SCENARIO_NAMES, catalog, make_scenario
from padfall.seeding import episode_stream, stream
from padfall.sim import DroneState

SPL = make_scenario("SPL")
RANGES = NormalizationRanges()


def test_observation_at_pad_center_is_zero_offset():
    drone = DroneState.at_rest((0.0, 0.0, 0.0))
    obs = build_observation(drone, PadState(np.zeros(3), np.zeros(3)))
    assert np.array_equal(obs.d, np.zeros(3)) and np.array_equal(obs.delta_v, np.zeros(3))


def test_relative_velocity_of_moving_pad():
    obs = build_observation(DroneState.at_rest((1.0, 0.0, 1.0)), PadState(np.zeros(3), np.array([0.46, 0.0, 0.0])))
    assert np.array_equal(obs.delta_v, [0.46, 0.0, 0.0])


def test_observation_matches_subtraction_oracle():
    rng = stream(0, "obs-oracle")
    for _ in range(1000):
        p, v, q, u = rng.normal(size=(4, 3))
        obs = build_observation(DroneState(p, v), PadState(q, u))
        assert obs.d.tolist() == [q[i] - p[i] for i in range(3)]
        assert obs.delta_v.tolist() == [u[i] - v[i] for i in range(3)]


def test_normalization_examples():
    vec = np.zeros(15)
    vec[3] = 3.0
    assert normalize_observation(Observation.from_vector(vec), RANGES).v[0] == 1.0
    vec[3] = -5.0
    assert normalize_observation(Observation.from_vector(vec), RANGES).v[0] == -1.0
    assert normalize_observation(Observation.from_vector(np.zeros(15)), RANGES).as_vector().tolist() == [0.0] * 15


@given(st.lists(st.floats(-1e6, 1e6), min_size=15, max_size=15))
def test_normalized_components_in_unit_box(raw):
    out = ObservationNormalizer().fit().transform(np.array([raw]))
    assert np.all(np.abs(out) <= 1.0)


def test_normalizer_round_trip_inside_bounds():
    norm = ObservationNormalizer(RANGES).fit()
    X = stream(1, "norm").uniform(-1, 1, size=(50, 15)) * RANGES.bounds()
    assert np.allclose(norm.inverse_transform(norm.transform(X)), X)
    with pytest.raises(ValueError):
        norm.transform(np.zeros((2, 14)))


def test_action_mapping():
    drone = DroneState.at_rest((0.0, 0.0, 0.0))
    assert np.allclose(apply_action(drone, (1, 0, -1)), [0.1, 0.0, -0.1])
    assert np.array_equal(apply_action(drone, (0, 0, 0)), drone.position)
    drone = DroneState.at_rest((1.0, 1.0, 1.0))
    assert np.allclose(apply_action(drone, (0.5, 0.5, 0.0)), [1.05, 1.05, 1.0], atol=1e-15)


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_setpoint_step_bound(action):
    drone = DroneState.at_rest((0.3, -0.2, 0.7))
    assert np.linalg.norm(apply_action(drone, action) - drone.position) <= 0.1 * math.sqrt(3) + 1e-12


def test_landing_on_first_step():
    env = LandingEnv()
    env.reset(SPL, 0, 0, drone_position=(0.0, 0.0, 0.0))
    res = env.step(np.zeros(3))
    assert res.outcome == "landed" and res.terminated
    with pytest.raises(UsageError):
        env.step(np.zeros(3))


def test_out_of_bounds():
    env = LandingEnv()
    env.reset(SPL, 0, 0, drone_position=(5.0, 0.0, 1.0))
    assert env.step(np.zeros(3)).outcome == "out_of_bounds"


def test_timeout_at_600_steps():
    env = LandingEnv()
    env.reset(SPL, 0, 0, drone_position=(0.5, 0.5, 1.0))
    n = 0
    while True:
        res = env.step(np.zeros(3))
        n += 1
        if res.terminated:
            break
    assert res.outcome == "timeout" and n == 600 == env.max_steps
    assert res.info["done"] is False


def test_landing_reward_only_on_landing_step():
    plain = LandingEnv()
    bonus = LandingEnv(episode_config=EpisodeConfig(landing_reward=2.0))
    for env in (plain, bonus):
        env.reset(SPL, 0, 0, drone_position=(0.0, 0.0, 0.0))
    assert bonus.step(np.zeros(3)).reward == pytest.approx(plain.step(np.zeros(3)).reward + 2.0)
    for env in (plain, bonus):
        env.reset(SPL, 0, 0, drone_position=(0.5, 0.0, 1.0))
    assert bonus.step(np.zeros(3)).reward == plain.step(np.zeros(3)).reward


def test_reset_is_deterministic_and_indexed():
    env = LandingEnv()
    a = env.reset(SPL, 3, 7)
    b = env.reset(SPL, 3, 7)
    assert np.array_equal(a, b)
    spawns = {tuple(LandingEnv().reset(SPL, 3, i)) for i in range(1000)}
    assert len(spawns) == 1000


def test_calm_scenario_has_zero_wind():
    env = LandingEnv()
    env.reset(make_scenario("LMPL"), 0, 0)
    for _ in range(30):
        res = env.step(np.zeros(3))
        assert not res.info["gust"].any()


def _rollout(scenario, seed, index, actions):
    env = LandingEnv()
    env.reset(scenario, seed, index)
    out = []
    for a in actions:
        res = env.step(a)
        out.append((res.observation.tobytes(), res.reward, res.outcome))
        if res.terminated:
            break
    return out


@pytest.mark.parametrize("name", ["CMPL", "CTL", "LMPL-WD-8500"])
def test_full_episode_determinism(name):
    actions = stream(2, "actions").uniform(-1, 1, size=(120, 3))
    sc = make_scenario(name)
    assert _rollout(sc, 5, 1, actions) == _rollout(sc, 5, 1, actions)


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_random_rollouts_respect_invariants(name):
    sc = make_scenario(name)
    env = LandingEnv()
    for episode in range(2):
        env.reset(sc, 11, episode)
        rng = episode_stream(11, episode, "explore")
        steps = 0
        while True:
            res = env.step(rng.uniform(-1, 1, size=3))
            steps += 1
            assert np.all(np.abs(res.observation) <= 1.0)
            if res.outcome == "landed":
                tp = env.state.touchdown_point
                assert math.hypot(tp[0], tp[1]) <= 0.25
            if res.terminated:
                break
        assert steps <= env.max_steps


def test_step_before_reset_and_bad_action():
    env = LandingEnv()
    with pytest.raises(UsageError):
        env.step(np.zeros(3))
    env.reset(SPL, 0, 0)
    with pytest.raises(UsageError):
        env.step(np.array([np.nan, 0, 0]))


def test_config_validation():
    with pytest.raises(ConfigError):
        EpisodeConfig(max_duration=0)
    with pytest.raises(ConfigError):
        EpisodeConfig(spawn_region=((1, 0, 0), (0, 1, 1)))
    with pytest.raises(ConfigError):
        LandingEnv(episode_config=EpisodeConfig(success_xy_tolerance=0.4))
    with pytest.raises(ConfigError):
        NormalizationRanges(d=0.0)
    with pytest.raises(ConfigError):
        make_scenario("NOPE")


def test_catalog_contents():
    cat = catalog()
    assert set(cat) == set(SCENARIO_NAMES)
    assert cat["SPL"].trajectory.kind == "static" and cat["SPL"].impeller is None
    assert cat["LMPL-WD-8500"].impeller.magnitude == 0.05
    assert cat["CTL"].trajectory.kind == "complex3d" and cat["CTL"].gusts.p_episode == 0.2
