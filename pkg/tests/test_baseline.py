import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import synthetic_track
from sklearn.base import clone

from padfall.baseline import (
    BaselineConfig,
    EkfModel,
    EkfPidBaseline,
    EkfState,
    PursuitMemory,
    baseline_action,
    ekf_predict,
    ekf_update,
)
from padfall.errors import FilterDivergenceError
from padfall.evaluation import run_episode
from padfall.scenarios import make_scenario
from padfall.seeding import stream
from padfall.sim import DroneState

UNIT = EkfModel(dt_factor=1.0)


def random_psd(rng, n=6):
    m = rng.normal(size=(n, n))
    return m @ m.T + 1e-3 * np.eye(n)


def test_unit_transition_matrix_matches_paper_form():
    A = UNIT.A
    expected = np.eye(6)
    for i in range(3):
        expected[i, i + 3] = 1.0
    assert np.array_equal(A, expected)
    assert np.array_equal(UNIT.H, np.hstack([np.eye(3), np.zeros((3, 3))]))


def test_predict_propagates_constant_velocity():
    s = EkfState(np.array([0, 0, 0, 1.0, 0, 0]), np.eye(6))
    assert np.array_equal(ekf_predict(s, UNIT).x, [1.0, 0, 0, 1.0, 0, 0])
    still = EkfState(np.array([0.3, 0.2, 0.1, 0, 0, 0]), np.eye(6))
    assert np.array_equal(ekf_predict(still, EkfModel()).x[:3], [0.3, 0.2, 0.1])


def test_predict_grows_trace_with_process_noise():
    rng = stream(0, "psd")
    for _ in range(50):
        s = EkfState(np.zeros(6), random_psd(rng))
        # oracle: A P A^T + Q computed element by element
        A = UNIT.A
        P = s.P
        manual = np.array([[sum(A[i, k] * P[k, l] * A[j, l] for k in range(6) for l in range(6))
                            for j in range(6)] for i in range(6)]) + np.diag(s.process_variance)
        out = ekf_predict(s, UNIT)
        assert np.allclose(out.P, manual, atol=1e-12)
        assert np.trace(out.P) > np.trace(UNIT.A @ P @ UNIT.A.T)


def test_zero_innovation_leaves_state():
    s = EkfState(np.array([1.0, 2.0, 3.0, 0.1, 0.0, -0.1]), np.eye(6) * 0.1)
    assert np.allclose(ekf_update(s, s.x[:3], EkfModel()).x, s.x, atol=1e-15)


def test_trusting_measurement_limit():
    s = EkfState(np.zeros(6), np.eye(6), measurement_variance=np.full(3, 1e-15))
    z = np.array([0.4, -0.2, 0.9])
    assert np.allclose(ekf_update(s, z, EkfModel()).x[:3], z, atol=1e-9)


def test_exact_measurements_recover_truth_in_two_updates():
    model = EkfModel()
    truth_v = np.array([0.2, -0.1, 0.05])
    s = EkfState(np.zeros(6), np.eye(6), process_variance=np.zeros(6), measurement_variance=np.zeros(3))
    p0 = np.array([0.1, 0.1, 0.0])
    for k in (1, 2):
        s = ekf_update(ekf_predict(s, model), p0 + truth_v * model.dt_factor * k, model)
    assert np.allclose(s.x, np.concatenate([p0 + truth_v * 2 * model.dt_factor, truth_v]), atol=1e-9)


def test_synthetic_track_quality():
    for seed in range(3):
        stats = synthetic_track(seed)
        assert stats["rmse"] < 0.01
        assert stats["rmse"] < stats["raw_rmse"]
        assert stats["max_velocity_error"] < 0.05
        assert stats["min_eigenvalue"] >= -1e-9


def test_non_pd_innovation_raises():
    s = EkfState(np.zeros(6), -np.eye(6), measurement_variance=np.zeros(3))
    with pytest.raises(FilterDivergenceError):
        ekf_update(s, np.zeros(3), EkfModel())
    with pytest.raises(ValueError):
        ekf_update(EkfState.initial(np.zeros(3)), [np.nan, 0, 0], EkfModel())


def test_descend_branch_over_static_pad():
    cfg = BaselineConfig()
    drone = DroneState.at_rest((0.0, 0.0, 1.0))
    ekf = EkfState(np.zeros(6), np.eye(6))
    memory = PursuitMemory(z_setpoint=1.0)
    sp = baseline_action(drone, ekf, cfg, memory, 1 / 30)
    assert sp[2] == pytest.approx(1.0 - 0.3 / 30, abs=1e-15)
    assert sp[0] == 0.0 and sp[1] == 0.0


def test_lookahead_leads_moving_pad():
    cfg = BaselineConfig(kp=1.0, ki=0.0, kd=0.0)
    ekf = EkfState(np.array([0.0, 0, 0, 0.3, 0, 0]), np.eye(6))
    drone = DroneState.at_rest((0.0, 0.0, 1.0))
    sp = baseline_action(drone, ekf, cfg, PursuitMemory(z_setpoint=1.0), 1 / 30)
    # kp * (0.15 lead) clipped to the 0.1 m envelope
    assert sp[0] == pytest.approx(0.1)
    sp = baseline_action(drone, ekf, BaselineConfig(kp=0.5, ki=0.0, kd=0.0), PursuitMemory(z_setpoint=1.0))
    assert sp[0] == pytest.approx(0.5 * 0.15)


def test_altitude_held_outside_trigger_radius():
    drone = DroneState.at_rest((1.0, 0.0, 0.8))
    sp = baseline_action(drone, EkfState(np.zeros(6), np.eye(6)), BaselineConfig(), PursuitMemory(z_setpoint=0.8))
    assert sp[2] == 0.8


@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=6, max_size=6),
    st.floats(-2, 2),
)
def test_setpoint_envelope(pos, x, z_set):
    drone = DroneState.at_rest(pos)
    sp = baseline_action(drone, EkfState(np.array(x), np.eye(6)), BaselineConfig(), PursuitMemory(z_setpoint=z_set))
    assert np.all(np.abs(sp - drone.position) <= 0.1 + 1e-12)


def test_controller_is_an_estimator_and_deterministic():
    est = EkfPidBaseline(kp=0.8)
    assert clone(est).get_params()["kp"] == 0.8
    assert EkfPidBaseline.from_config(est.config()).get_params() == est.get_params()
    sc = make_scenario("LMPL")
    a = run_episode(EkfPidBaseline(), sc, 2)
    b = run_episode(EkfPidBaseline(), sc, 2)
    assert a.outcome == b.outcome and a.rows == b.rows


def test_spl_landing():
    rec = run_episode(EkfPidBaseline(), make_scenario("SPL"), 0)
    assert rec.outcome == "landed"
