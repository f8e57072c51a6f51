import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import pearson_two_pass

from padfall.baseline import EkfPidBaseline
from padfall.evaluation import (
    EpisodeRecord,
    ScriptedOracle,
    ZeroPolicy,
    aggregate_report,
    episode_csv_text,
    format_rate,
    landing_metrics,
    pearson,
    read_episode_csv,
    run_episode,
    run_episodes,
    summary_stats,
    velocity_correlation_stats,
    wind_recognition_correlation,
    write_episode_csv,
)
from padfall.scenarios import make_scenario
from padfall.seeding import stream


def test_pearson_matches_two_pass_oracle():
    rng = stream(0, "pearson")
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        x = rng.normal(size=n)
        y = 0.3 * x + rng.normal(size=n)
        assert abs(pearson(x, y) - pearson_two_pass(list(x), list(y))) <= 1e-10


def test_pearson_extremes_and_degenerate():
    x = stream(1, "p").normal(size=50)
    assert abs(pearson(x, x) - 1.0) <= 1e-12
    assert abs(pearson(x, -x) + 1.0) <= 1e-12
    assert pearson(np.ones(5), np.arange(5)) is None
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_invariant_to_affine_maps(xs, scale, shift):
    x = np.array(xs)
    y = np.sin(x) + 0.01 * x
    r = pearson(x, y)
    r2 = pearson(scale * x + shift, y)
    if r is None or r2 is None:
        return
    assert -1.0 <= r <= 1.0
    assert abs(r - r2) < 1e-6


def test_summary_stats():
    s = summary_stats([2, 4, 6])
    assert s["mean"] == 4 and s["median"] == 4 and s["min"] == 2 and s["max"] == 6
    assert s["std"] == pytest.approx(math.sqrt(8 / 3))
    assert summary_stats([]) is None


def test_format_rate():
    assert format_rate(1.0) == "100%"
    assert format_rate(11 / 12) == "91.67%"
    assert format_rate(0.2) == "20%"


def test_zero_policy_never_lands_from_altitude():
    rec = run_episode(ZeroPolicy(), make_scenario("SPL"), 0)
    assert rec.outcome == "timeout" and len(rec.rows) == 600
    metrics = landing_metrics([rec])
    assert metrics["success_rate"] == 0.0 and metrics["precision_cm"] is None


def test_oracle_and_baseline_land_on_static_pad():
    sc = make_scenario("SPL", episodes=3)
    for ctl in (ScriptedOracle(), EkfPidBaseline()):
        m = landing_metrics(run_episodes(ctl, sc, range(3)))
        assert m["success_rate"] == 1.0
        assert m["precision_cm"]["max"] <= 25.0


def test_worker_count_does_not_change_records():
    sc = make_scenario("LMPL-WD-4500", episodes=3)
    a = run_episodes(EkfPidBaseline(), sc, range(3), workers=1)
    b = run_episodes(EkfPidBaseline(), sc, range(3), workers=2)
    assert [episode_csv_text(r) for r in a] == [episode_csv_text(r) for r in b]


def test_csv_round_trip(tmp_path):
    rec = run_episode(EkfPidBaseline(), make_scenario("CTL"), 1)
    write_episode_csv(rec, tmp_path / "e.csv")
    back = read_episode_csv(tmp_path / "e.csv")
    assert episode_csv_text(back) == episode_csv_text(rec)
    assert back.rows == rec.rows and back.outcome == rec.outcome


def _record(v_drone, v_pad, wind=None):
    rows = []
    for i, (a, b) in enumerate(zip(v_drone, v_pad)):
        rows.append({"vx": a, "vy": 0.0, "vz": 0.0, "pad_vx": b, "pad_vy": 0.0, "pad_vz": 0.0,
                     "sp_x": float(i), "sp_y": 0.0, "sp_z": float(i % 2), "px": float(i) + 0.1 * (i % 3),
                     "py": 0.0, "pz": float(i % 2), "wind_active": 0 if wind is None else wind[i]})
    return EpisodeRecord("LMPL", 0, rows, "timeout")


def test_velocity_correlation_magnitude_and_absent():
    recs = [_record([0.1, 0.2, 0.3], [0.2, 0.4, 0.6]), _record([0.1, 0.2, 0.3], [0.2, 0.2, 0.2])]
    out = velocity_correlation_stats(recs)
    assert out["count"] == 1 and out["absent"] == 1
    assert out["stats"]["mean"] == pytest.approx(1.0, abs=1e-12)
    out = velocity_correlation_stats(recs, mode="axis")
    assert out["count"] == 1
    with pytest.raises(ValueError):
        velocity_correlation_stats(recs, mode="bogus")


def test_wind_recognition_partitions():
    rec = _record([0.1] * 6, [0.0] * 6, wind=[1, 1, 1, 0, 0, 0])
    out = wind_recognition_correlation([rec])
    assert out["wind"][0] == pytest.approx(pearson([0, 1, 2], [0.0, 1.1, 2.2]))
    assert out["wind"][1] is None  # constant y
    calm = wind_recognition_correlation([_record([0.1] * 4, [0.0] * 4)])
    assert calm["wind"] == [None, None, None]


def test_aggregate_report_tables(tmp_path):
    sc = make_scenario("SPL", episodes=2)
    results = {"ekf-baseline": {"SPL": run_episodes(EkfPidBaseline(), sc, range(2))},
               "zero": {"SPL": run_episodes(ZeroPolicy(), sc, range(2))}}
    metrics = aggregate_report(results, tmp_path)
    lines = (tmp_path / "success_rates.csv").read_text().splitlines()
    assert lines == ["Test Case,ekf-baseline,zero", "SPL,100%,0%"]
    precision = (tmp_path / "landing_precision.csv").read_text().splitlines()[1].split(",")
    assert precision[3:] == ["N/A", "N/A"]
    assert metrics["zero"]["SPL"]["landing"]["landed"] == 0
    assert (tmp_path / "trajectories_ekf-baseline_SPL.svg").exists()
    assert (tmp_path / "wind_recognition.csv").read_text().startswith("Controller,Test Case,Partition")
