import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from padfall.errors import ConfigError, StateCorruptionError
from padfall.sim import (
    DroneParams,
    DroneState,
    PidGains,
    SimConfig,
    ground_effect_multiplier,
    pid_position_step,
    step_physics,
    wrap_angle,
)

CFG = SimConfig()
PARAMS = DroneParams()


def run(state, setpoint, seconds, params=PARAMS, cfg=CFG, force=(0.0, 0.0, 0.0)):
    for _ in range(int(round(seconds / cfg.physics_dt))):
        state = step_physics(state, setpoint, force, params, cfg)
    return state


def test_wrap_angle_examples():
    assert wrap_angle(0.0) == 0.0
    # odd multiples of pi land on -pi
    assert wrap_angle(3 * math.pi) == pytest.approx(-math.pi)
    assert wrap_angle(-7 * math.pi / 2) == pytest.approx(math.pi / 2, abs=1e-12)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_angle_range_and_congruence(a):
    w = wrap_angle(a)
    assert -math.pi <= w < math.pi
    k = (a - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-9


def test_wrap_angle_arrays():
    out = wrap_angle(np.array([0.0, 3 * math.pi, -7 * math.pi / 2]))
    assert np.allclose(out, [0.0, -math.pi, math.pi / 2])


def test_hover_is_a_fixed_point():
    state = DroneState.at_rest((0.0, 0.0, 1.0))
    for _ in range(240):
        state = step_physics(state, (0.0, 0.0, 1.0), np.zeros(3), PARAMS, CFG)
        assert np.all(np.abs(state.velocity) < 1e-9)


@given(st.floats(0.01, 0.1))
def test_hover_fixed_point_for_any_mass(mass):
    params = DroneParams(mass=mass, max_total_thrust=mass * 9.81 * 2.2)
    state = DroneState.at_rest((0.3, -0.2, 0.8))
    for _ in range(16):
        state = step_physics(state, state.position.copy(), np.zeros(3), params, CFG)
    assert np.all(np.abs(state.velocity) < 1e-9)


def test_free_fall():
    params = DroneParams(max_total_thrust=0.0)
    state = run(DroneState.at_rest((0, 0, 100.0)), (0, 0, 100.0), 1.0, params)
    assert state.velocity[2] == pytest.approx(-9.81, abs=1e-9)


def test_free_fall_integrator_is_first_order():
    def position_error(dt):
        cfg = SimConfig(physics_dt=dt, control_period=dt)
        state = run(DroneState.at_rest((0, 0, 100.0)), (0, 0, 100.0), 1.0, DroneParams(max_total_thrust=0.0), cfg)
        return abs(state.position[2] - (100.0 - 0.5 * 9.81))

    assert position_error(1 / 240) / position_error(1 / 480) >= 1.9


def test_constant_force_closed_form():
    # attitude frozen level, drag off: a = F/m along x
    params = DroneParams(attitude_loop=False)
    state = DroneState.at_rest((0, 0, 1.0))
    for _ in range(240):
        state = step_physics(state, (state.position[0], 0.0, 1.0), (0.005, 0, 0), params, CFG)
    assert state.velocity[0] == pytest.approx(0.005 / 0.027, rel=1e-9)
    assert state.velocity[0] == pytest.approx(0.1852, abs=1e-4)


def test_pid_equilibrium_and_linearity():
    state = DroneState.at_rest((0, 0, 1.0))
    thrust, att, integ = pid_position_step(state, (0, 0, 1.0), PARAMS.pid_gains, CFG.physics_dt, np.zeros(3),
                                           PARAMS.mass)
    assert thrust == pytest.approx(PARAMS.mass * 9.81)
    assert np.all(att == 0.0)
    k = 0.4
    gains = PidGains(kp=(k, k, k), ki=(0, 0, 0), kd=(0, 0, 0))
    thrust, _, _ = pid_position_step(state, (0, 0, 2.0), gains, CFG.physics_dt, np.zeros(3), PARAMS.mass)
    assert thrust == pytest.approx(PARAMS.mass * 9.81 + k)


def test_integrator_is_clamped():
    state = DroneState.at_rest((0, 0, 0.0))
    _, _, integ = pid_position_step(state, (100, -100, 100), PARAMS.pid_gains, 1.0, np.zeros(3), PARAMS.mass)
    assert np.all(np.abs(integ) <= PARAMS.pid_gains.integrator_limit)


def test_step_response_with_default_gains():
    state = run(DroneState.at_rest((0, 0, 1.0)), (1.0, 0.0, 1.0), 3.0)
    assert abs(state.position[0] - 1.0) < 0.05


def test_determinism_bit_identical():
    s0 = DroneState.at_rest((0.1, 0.2, 0.3))
    a = run(s0, (0.5, -0.3, 1.0), 0.5, force=(0.001, 0.0, -0.002))
    b = run(s0, (0.5, -0.3, 1.0), 0.5, force=(0.001, 0.0, -0.002))
    assert np.array_equal(a.as_vector(), b.as_vector())


def test_kinetic_energy_non_increasing_with_drag_and_no_thrust():
    params = DroneParams(max_total_thrust=0.0, linear_drag_coeff=(0.05, 0.05, 0.05))
    cfg = SimConfig(gravity=0.0)
    state = DroneState(np.zeros(3), np.array([1.0, -0.5, 0.3]))
    energy = float(state.velocity @ state.velocity)
    for _ in range(500):
        state = step_physics(state, state.position, np.zeros(3), params, cfg)
        e = float(state.velocity @ state.velocity)
        assert e <= energy + 1e-15
        energy = e


@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.lists(st.floats(-4, 4), min_size=3, max_size=3),
)
def test_thrust_saturation(setpoint, velocity, position):
    state = DroneState(np.array(position), np.array(velocity))
    thrust, _, _ = pid_position_step(state, setpoint, PARAMS.pid_gains, CFG.physics_dt, np.zeros(3), PARAMS.mass)
    clipped = min(max(thrust, 0.0), PARAMS.max_total_thrust)
    assert 0.0 <= clipped <= PARAMS.max_total_thrust
    nxt = step_physics(state, setpoint, np.zeros(3), PARAMS, CFG)
    # realized vertical acceleration is bounded by the thrust limit
    az = (nxt.velocity[2] - state.velocity[2]) / CFG.physics_dt + 9.81
    assert az <= PARAMS.max_total_thrust / PARAMS.mass + 1e-9


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_attitude_stays_wrapped(att):
    state = DroneState(np.zeros(3), attitude=np.array(att))
    nxt = step_physics(state, (0, 0, 0), np.zeros(3), PARAMS, CFG)
    assert np.all(nxt.attitude >= -math.pi) and np.all(nxt.attitude < math.pi)


def test_non_finite_input_rejected():
    state = DroneState.at_rest((0, 0, 1.0))
    with pytest.raises(StateCorruptionError):
        step_physics(state, (np.nan, 0, 0), np.zeros(3), PARAMS, CFG)
    with pytest.raises(StateCorruptionError):
        step_physics(state, (0, 0, 0), (0, np.inf, 0), PARAMS, CFG)


def test_setpoint_outside_bounds_is_clamped():
    state = DroneState.at_rest((4.9, 0, 1.0))
    far = step_physics(state, (100.0, 0, 1.0), np.zeros(3), PARAMS, CFG)
    edge = step_physics(state, (5.0, 0, 1.0), np.zeros(3), PARAMS, CFG)
    assert np.array_equal(far.as_vector(), edge.as_vector())


def test_params_validation():
    with pytest.raises(ConfigError):
        DroneParams(max_total_thrust=0.1).validate()
    with pytest.raises(ConfigError):
        DroneParams(mass=-1.0).validate()
    with pytest.raises(ConfigError):
        SimConfig(control_period=0.01, physics_dt=0.003)
    assert SimConfig().substeps == 8


def test_ground_effect_multiplier():
    off = SimConfig()
    on = SimConfig(ground_effect=True)
    assert ground_effect_multiplier(0.05, off) == 1.0
    assert ground_effect_multiplier(0.2, on) == 1.0
    h = 0.05
    assert ground_effect_multiplier(h, on) == pytest.approx(1 + 0.5 * (0.0231 / (4 * h)) ** 2)
