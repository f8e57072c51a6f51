"""Scenario rollouts, episode records, and the landing metric families."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from padfall.env import ACTION_SCALE, LandingEnv
from padfall.neural import MlpSpec, ParamSet, forward
from padfall.plotting import trajectory_svg
from padfall.wind import impeller_position

ROW_COLUMNS = (
    "t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw",
    "pad_x", "pad_y", "pad_z", "pad_vx", "pad_vy", "pad_vz",
    "cx", "cy", "cz", "sp_x", "sp_y", "sp_z", "reward", "fx", "fy", "fz", "wind_active", "outcome",
)
_NUMERIC = ROW_COLUMNS[:-2]


class NetworkPolicy:
    """Deterministic actor network as a controller."""

    name = "policy"

    def __init__(self, params: ParamSet, spec: MlpSpec):
        self.params = params
        self.spec = spec

    def reset(self, env, master_seed, episode_index):
        pass

    def act(self, env, obs):
        return forward(self.params, self.spec, np.asarray(obs, dtype=np.float32))[0]


class ScriptedOracle:
    """Cheats with the true pad pose: puts the setpoint on the pad center.

    It leads the pad by one control period plus the inner loop's steady-state
    tracking lag, holds ``hover_height`` above the
    surface until the horizontal error is below ``align_tolerance``, then drops.
    """

    name = "scripted-oracle"

    def __init__(self, hover_height: float = 0.1, align_tolerance: float = 0.03):
        self.hover_height = hover_height
        self.align_tolerance = align_tolerance

    def reset(self, env, master_seed, episode_index):
        pass

    def act(self, env, obs):
        pad, drone = env.state.pad, env.state.drone
        gains = env.drone_params.pid_gains
        lag = np.asarray(gains.kd) / np.asarray(gains.kp)
        target = pad.position + pad.velocity * (env.sim_config.control_period + lag)
        d = target - drone.position
        miss = pad.position - drone.position
        if math.hypot(miss[0], miss[1]) > self.align_tolerance:
            d[2] += self.hover_height
        return np.clip(d / ACTION_SCALE, -1.0, 1.0)


class ZeroPolicy:
    name = "zero"

    def reset(self, env, master_seed, episode_index):
        pass

    def act(self, env, obs):
        return np.zeros(3)


@dataclass
class EpisodeRecord:
    scenario: str
    episode_index: int
    rows: list = field(default_factory=list)
    outcome: str = "in_progress"
    touchdown_point: np.ndarray | None = None
    touchdown_speed: float | None = None
    valid: bool = True
    impeller_offset: tuple | None = None

    @property
    def rewards(self) -> list:
        return [r["reward"] for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    @property
    def landed(self) -> bool:
        return self.outcome == "landed"


def run_episode(controller, scenario, episode_index: int, env: LandingEnv | None = None,
                master_seed: int | None = None) -> EpisodeRecord:
    env = env or LandingEnv()
    seed = scenario.master_seed if master_seed is None else master_seed
    obs = env.reset(scenario, seed, episode_index)
    controller.reset(env, seed, episode_index)
    record = EpisodeRecord(scenario.name, episode_index,
                           impeller_offset=scenario.impeller.origin_offset if scenario.impeller else None)
    while True:
        action = np.asarray(controller.act(env, obs), dtype=np.float64)
        if action.shape != (3,) or not np.isfinite(action).all():
            record.valid = False
            record.outcome = "invalid"
            return record
        res = env.step(action)
        drone, pad = env.state.drone, env.state.pad
        c = np.clip(action, -1.0, 1.0)
        sp = res.info["setpoint"]
        f = res.info["applied_force"]
        values = (res.info["time"], *drone.position, *drone.velocity, *drone.attitude, *pad.position, *pad.velocity,
                  *c, *sp, res.reward, *f)
        row = {k: float(v) for k, v in zip(_NUMERIC, values)}
        row["wind_active"] = int(res.info["wind_active"])
        row["outcome"] = res.outcome
        record.rows.append(row)
        obs = res.observation
        if res.terminated:
            break
    record.outcome = env.state.outcome
    if record.landed:
        record.touchdown_point = env.state.touchdown_point.copy()
        record.touchdown_speed = env.state.touchdown_speed
    return record


def _run_one(controller, scenario, env_factory, master_seed, index):
    return run_episode(controller, scenario, index, env_factory(), master_seed)


def run_episodes(controller, scenario, indices, env_factory=LandingEnv, master_seed: int | None = None,
                 workers: int = 1) -> list:
    """Records in index order; each episode is independent, so ``workers`` never changes results."""
    indices = list(indices)
    job = partial(_run_one, controller, scenario, env_factory, master_seed)
    if workers <= 1:
        return [job(i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, indices))


def pearson(x, y) -> float | None:
    """Sample Pearson coefficient, or ``None`` when either series is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two 1-D series of equal length >= 2")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    xc = x - math.fsum(x) / len(x)
    yc = y - math.fsum(y) / len(y)
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    # separate roots so tiny or huge spreads do not under/overflow the product
    denom = math.sqrt(sxx) * math.sqrt(syy)
    if denom == 0.0:
        return None
    r = float(xc @ yc) / denom
    return min(1.0, max(-1.0, r))


def summary_stats(values) -> dict | None:
    """min/mean/std(population)/median/max; ``None`` for an empty list."""
    values = [float(v) for v in values]
    if not values:
        return None
    return {
        "min": min(values),
        "mean": statistics.fmean(values),
        "std": statistics.pstdev(values),
        "median": statistics.median(values),
        "max": max(values),
        "count": len(values),
    }


def landing_metrics(records) -> dict:
    if not records:
        raise ValueError("landing_metrics needs at least one record")
    landed = [r for r in records if r.landed]
    distances = [100.0 * math.hypot(r.touchdown_point[0], r.touchdown_point[1]) for r in landed]
    return {
        "episodes": len(records),
        "landed": len(landed),
        "success_rate": len(landed) / len(records),
        "precision_cm": summary_stats(distances),
    }


def velocity_correlation_stats(records, mode: str = "magnitude") -> dict:
    """Per-episode Pearson r between drone and pad speed, then aggregated.

    ``mode="axis"`` correlates x/y/z velocity components separately and averages
    the defined ones per episode.
    """
    values, absent = [], 0
    for rec in records:
        if len(rec.rows) < 2:
            absent += 1
            continue
        dv = np.stack([rec.column("vx"), rec.column("vy"), rec.column("vz")], axis=1)
        pv = np.stack([rec.column("pad_vx"), rec.column("pad_vy"), rec.column("pad_vz")], axis=1)
        if mode == "magnitude":
            r = pearson(np.linalg.norm(dv, axis=1), np.linalg.norm(pv, axis=1))
        elif mode == "axis":
            per_axis = [pearson(dv[:, k], pv[:, k]) for k in range(3)]
            per_axis = [v for v in per_axis if v is not None]
            r = statistics.fmean(per_axis) if per_axis else None
        else:
            raise ValueError("mode must be 'magnitude' or 'axis'")
        if r is None:
            absent += 1
        else:
            values.append(r)
    stats = summary_stats(values)
    return {"stats": stats, "absent": absent, "count": len(values)}


def wind_recognition_correlation(records) -> dict:
    """Per-axis r between commanded setpoint and realized position, split by wind activity.

    Returns ``{"wind": [rx, ry, rz], "no_wind": [...]}``; each entry is the mean
    over episodes where that partition exists and is non-degenerate, else ``None``.
    """
    out = {}
    for key, flag in (("wind", 1), ("no_wind", 0)):
        per_axis = []
        for sp_col, pos_col in (("sp_x", "px"), ("sp_y", "py"), ("sp_z", "pz")):
            rs = []
            for rec in records:
                rows = [r for r in rec.rows if r["wind_active"] == flag]
                if len(rows) < 2:
                    continue
                r = pearson([q[sp_col] for q in rows], [q[pos_col] for q in rows])
                if r is not None:
                    rs.append(r)
            per_axis.append(statistics.fmean(rs) if rs else None)
        out[key] = per_axis
    return out


# -- persistence ---------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v))


def episode_csv_text(record: EpisodeRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_COLUMNS)
    for row in record.rows:
        writer.writerow([_num(row[c]) for c in _NUMERIC] + [row["wind_active"], row["outcome"]])
    footer = {
        "scenario": record.scenario,
        "episode": str(record.episode_index),
        "outcome": record.outcome,
        "valid": str(int(record.valid)),
    }
    if record.touchdown_point is not None:
        footer["touchdown"] = ";".join(_num(v) for v in record.touchdown_point)
        footer["touchdown_speed"] = _num(record.touchdown_speed)
    if record.impeller_offset is not None:
        footer["impeller_offset"] = ";".join(_num(v) for v in record.impeller_offset)
    buf.write("# " + " ".join(f"{k}={v}" for k, v in footer.items()) + "\n")
    return buf.getvalue()


def write_episode_csv(record: EpisodeRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(episode_csv_text(record))


def read_episode_csv(path) -> EpisodeRecord:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    footer = dict(item.split("=", 1) for item in lines[-1][2:].split())
    rows = []
    for values in csv.reader(lines[1:-1]):
        row = {k: float(v) for k, v in zip(_NUMERIC, values)}
        row["wind_active"] = int(values[-2])
        row["outcome"] = values[-1]
        rows.append(row)
    rec = EpisodeRecord(footer["scenario"], int(footer["episode"]), rows, footer["outcome"],
                        valid=footer["valid"] == "1")
    if "touchdown" in footer:
        rec.touchdown_point = np.array([float(v) for v in footer["touchdown"].split(";")])
        rec.touchdown_speed = float(footer["touchdown_speed"])
    if "impeller_offset" in footer:
        rec.impeller_offset = tuple(float(v) for v in footer["impeller_offset"].split(";"))
    return rec


def format_rate(rate: float) -> str:
    """``1.0 -> '100%'``, ``0.9167 -> '91.67%'``."""
    text = f"{100.0 * rate:.2f}".rstrip("0").rstrip(".")
    return f"{text}%"


def _cell(value, digits: int = 2) -> str:
    return "N/A" if value is None else f"{value:.{digits}f}"


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def trajectory_plot(records, title: str = "") -> str:
    drone_paths = [[(r["px"], r["py"]) for r in rec.rows] for rec in records]
    pad_paths = [[(r["pad_x"], r["pad_y"]) for r in rec.rows] for rec in records]
    impellers = []
    for rec in records:
        if rec.impeller_offset is not None and rec.rows:
            last = rec.rows[-1]
            impellers.append(tuple(impeller_position((last["pad_x"], last["pad_y"], last["pad_z"]),
                                                     _Offset(rec.impeller_offset))[:2]))
    return trajectory_svg(drone_paths, pad_paths, impellers, title)


@dataclass(frozen=True)
class _Offset:
    origin_offset: tuple


def aggregate_report(results: dict, out_dir, plots: bool = True) -> dict:
    """Write table CSVs (and trajectory SVGs) for ``{controller: {scenario: [records]}}``.

    Returns the computed metrics keyed the same way.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    controllers = list(results)
    scenarios = []
    for per in results.values():
        for name in per:
            if name not in scenarios:
                scenarios.append(name)
    metrics = {
        c: {
            s: {
                "landing": landing_metrics(recs),
                "velocity": velocity_correlation_stats(recs),
                "wind": wind_recognition_correlation(recs),
            }
            for s, recs in results[c].items()
        }
        for c in controllers
    }

    def get(c, s):
        return metrics[c].get(s)

    _write_table(out / "success_rates.csv", ["Test Case", *controllers],
                 [[s, *(format_rate(get(c, s)["landing"]["success_rate"]) if get(c, s) else "N/A"
                        for c in controllers)] for s in scenarios])

    header = ["Test Case"]
    for c in controllers:
        header += [f"{c} Mean (cm)", f"{c} STD (cm)"]
    rows = []
    for s in scenarios:
        row = [s]
        for c in controllers:
            p = get(c, s)["landing"]["precision_cm"] if get(c, s) else None
            row += [_cell(p and p["mean"]), _cell(p and p["std"])]
        rows.append(row)
    _write_table(out / "landing_precision.csv", header, rows)

    header = ["Test Case"]
    for c in controllers:
        header += [f"{c} Min (cm)", f"{c} Mean (cm)", f"{c} STD (cm)"]
    rows = []
    for s in scenarios:
        row = [s]
        for c in controllers:
            p = get(c, s)["landing"]["precision_cm"] if get(c, s) else None
            row += [_cell(p and p["min"]), _cell(p and p["mean"]), _cell(p and p["std"])]
        rows.append(row)
    _write_table(out / "landing_precision_detail.csv", header, rows)

    for c in controllers:
        header = ["Correlation", *scenarios]
        rows = []
        for stat in ("mean", "median", "std", "min", "max"):
            row = [stat.capitalize() if stat != "std" else "STD"]
            for s in scenarios:
                v = get(c, s)["velocity"]["stats"] if get(c, s) else None
                row.append(_cell(v and v[stat], 4))
            rows.append(row)
        rows.append(["Episodes", *(str(get(c, s)["velocity"]["count"]) if get(c, s) else "0" for s in scenarios)])
        _write_table(out / f"velocity_correlation_{_slug(c)}.csv", header, rows)

    header = ["Controller", "Test Case", "Partition", "r_x", "r_y", "r_z"]
    rows = []
    for c in controllers:
        for s in scenarios:
            if not get(c, s):
                continue
            for part in ("no_wind", "wind"):
                rows.append([c, s, part, *(_cell(v, 4) for v in get(c, s)["wind"][part])])
    _write_table(out / "wind_recognition.csv", header, rows)

    if plots:
        for c in controllers:
            for s, recs in results[c].items():
                with open(out / f"trajectories_{_slug(c)}_{s}.svg", "w", newline="\n") as fh:
                    fh.write(trajectory_plot(recs, f"{c} / {s}"))
    return metrics


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)
