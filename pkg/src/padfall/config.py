"""Run configuration: one YAML file, dotted-key overrides, a commented reference.

Every section maps onto a frozen dataclass from the module that owns it, so
the defaults live in exactly one place. Unknown keys are rejected with the full
dotted path of the offending field.
"""

from __future__ import annotations

import math
import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from functools import partial
from pathlib import Path

import yaml

from padfall.baseline import BaselineConfig
from padfall.env import EpisodeConfig, LandingEnv, NormalizationRanges
from padfall.errors import ConfigError
from padfall.reward import RewardParams
from padfall.scenarios import SCENARIO_NAMES, PlatformDefaults, WindDefaults, make_scenario
from padfall.sim import DroneParams, SimConfig
from padfall.td3 import TD3Config, config_hash

OUT_ENV_VAR = "PADFALL_OUT"


@dataclass(frozen=True)
class NeuralSection:
    hidden_dims: tuple = (512, 512, 256, 128)


@dataclass(frozen=True)
class TrainSection:
    total_steps: int = 500_000
    scenario: str = "SPL"
    spawn_region: tuple | None = ((-0.4, -0.4, 0.3), (0.4, 0.4, 0.8))


@dataclass(frozen=True)
class ScenarioSection:
    names: tuple = SCENARIO_NAMES
    episodes: int = 15
    master_seed: int | None = None
    spawn_region: tuple | None = None


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    drone: DroneParams = field(default_factory=DroneParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    observation: NormalizationRanges = field(default_factory=NormalizationRanges)
    platform: PlatformDefaults = field(default_factory=PlatformDefaults)
    wind: WindDefaults = field(default_factory=WindDefaults)
    reward: RewardParams = field(default_factory=RewardParams)
    neural: NeuralSection = field(default_factory=NeuralSection)
    td3: TD3Config = field(default_factory=TD3Config)
    train: TrainSection = field(default_factory=TrainSection)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    scenarios: ScenarioSection = field(default_factory=ScenarioSection)
    output_dir: str = "padfall_out"
    master_seed: int = 0
    workers: int = 1

    def env_factory(self):
        return partial(LandingEnv, drone_params=self.drone, sim_config=self.sim, reward_params=self.reward,
                       episode_config=self.episode, ranges=self.observation)

    def scenario(self, name: str, episodes: int | None = None, spawn_region=None):
        region = spawn_region if spawn_region is not None else self.scenarios.spawn_region
        return make_scenario(name, episodes or self.scenarios.episodes, self.scenarios.master_seed,
                             platform=self.platform, wind=self.wind, spawn_region=region)

    def train_scenario(self):
        return self.scenario(self.train.scenario, spawn_region=self.train.spawn_region)

    def digest(self) -> str:
        return config_hash(to_dict(self))


# td3.hidden_dims is owned by the neural section.
_EXCLUDED = {TD3Config: {"hidden_dims"}}

FIELD_DOCS = {
    "sim.physics_dt": "physics integration step, s (240 Hz)",
    "sim.control_period": "policy decision period, s (30 Hz)",
    "sim.gravity": "m/s^2",
    "sim.world_bounds": "setpoint clamp box [[xmin, ymin, zmin], [xmax, ymax, zmax]], m",
    "sim.ground_effect": "thrust multiplier 1 + k_g (r_prop / 4h)^2 below ground_effect_height",
    "sim.ground_effect_gain": "k_g",
    "sim.prop_radius": "r_prop, m",
    "sim.ground_effect_height": "altitude above the pad where ground effect starts, m",
    "drone.mass": "kg",
    "drone.inertia_diag": "kg m^2",
    "drone.max_total_thrust": "N",
    "drone.linear_drag_coeff": "N s/m per axis",
    "drone.attitude_time_constant": "first-order roll/pitch response, s",
    "drone.pid_gains.kp": "position loop proportional gains (tuned artifact values)",
    "drone.pid_gains.ki": "position loop integral gains",
    "drone.pid_gains.kd": "position loop derivative gains",
    "drone.pid_gains.integrator_limit": "anti-windup clamp per axis",
    "drone.max_tilt": "roll/pitch command limit, rad",
    "drone.attitude_loop": "false makes attitude track its command instantly",
    "episode.max_duration": "timeout, s",
    "episode.spawn_region": "drone spawn box relative to the pad start, m",
    "episode.success_xy_tolerance": "landed only within this horizontal distance of the pad center, m",
    "episode.touchdown_height": "vertical gap to the pad surface that counts as contact, m",
    "episode.max_touchdown_speed": "relative speed limit at touchdown, m/s",
    "episode.landing_reward": "added to the reward of the landing step (0 = reward module only)",
    "observation.theta": "attitude clip, rad",
    "observation.v_xy": "horizontal velocity clip, m/s",
    "observation.v_z": "vertical velocity clip, m/s",
    "observation.omega": "angular velocity clip, rad/s",
    "observation.d": "pad offset clip per axis, m",
    "observation.delta_v": "relative velocity clip per axis, m/s",
    "platform.linear_speed": "LMPL pad speed, m/s",
    "platform.curved_speed": "CMPL pad speed, m/s",
    "platform.complex_speed": "CTL horizontal pad speed, m/s",
    "platform.direction_change_interval": "s between waypoint changes",
    "platform.waypoint_region": "waypoint box around the origin, m",
    "platform.curvature_range": "curved segment curvature range, 1/m",
    "platform.z_amplitude": "CTL vertical oscillation amplitude, m",
    "platform.z_period": "CTL vertical oscillation period, s",
    "platform.half_extent": "pad half width, m",
    "wind.gusts.p_episode": "probability an episode is windy",
    "wind.gusts.p_step": "probability a windy decision step carries a gust",
    "wind.gusts.component_range": "gust components uniform in +-range, N",
    "wind.impeller_levels": "rpm -> peak jet force calibration, N",
    "wind.impeller_offset": "impeller position relative to the pad center (it rides with the pad), m",
    "wind.jet_radius": "Gaussian radial width of the jet, m",
    "wind.axial_falloff_length": "exponential axial decay length, m",
    "reward.gamma": "far-field penalty inside tanh",
    "reward.alpha": "progress shaping scale, 1/m",
    "reward.beta_penalty": "below-pad / edge penalty",
    "reward.zeta": "attractive potential strength, 1/m^2",
    "reward.eta": "repulsive potential strength",
    "reward.q_max": "repulsive potential range, m",
    "reward.far_threshold": "m",
    "reward.near_threshold": "m",
    "reward.speed_coeff": "speed penalty coefficient, s/m",
    "reward.edge_margin": "distance inside the pad edge that counts as near the edge, m",
    "reward.shaping_mode": "progress | literal",
    "neural.hidden_dims": "actor and critic hidden layer widths",
    "td3.batch_size": "transitions per update",
    "td3.learning_starts": "uniform random actions before this step",
    "td3.buffer_size": "replay capacity, transitions",
    "td3.discount": "return discount",
    "td3.soft_update_tau": "target network blend",
    "td3.policy_delay": "critic updates per actor update",
    "td3.target_noise_std": "target policy smoothing noise",
    "td3.target_noise_clip": "smoothing noise clip",
    "td3.exploration_noise_std": "Gaussian action noise while collecting",
    "td3.actor_learning_rate": "Adam step size",
    "td3.critic_learning_rate": "Adam step size",
    "td3.eval_interval": "decision steps between noise-free evaluations",
    "td3.eval_episodes": "episodes per evaluation",
    "td3.early_stop_success": "stop when the last early_stop_evals evaluations reach this success rate (null: off)",
    "td3.early_stop_evals": "evaluations the early-stop rule looks back over",
    "train.total_steps": "decision steps",
    "train.scenario": "training scenario name",
    "train.spawn_region": "null uses episode.spawn_region",
    "baseline.kp": "pursuit PID gains on the horizontal error",
    "baseline.ki": "integral gain",
    "baseline.kd": "derivative gain",
    "baseline.integral_limit": "integral clamp",
    "baseline.lookahead_horizon": "s of filtered pad velocity to lead by",
    "baseline.descend_trigger_radius": "descend once the lookahead error is inside this radius, m",
    "baseline.descent_rate": "m/s",
    "baseline.measurement_noise_std": "pad position sensor noise, m",
    "baseline.process_variance": "Q diagonal (position x3, velocity x3)",
    "baseline.measurement_variance": "R diagonal",
    "scenarios.names": "default suite for eval and bench",
    "scenarios.episodes": "episodes per scenario",
    "scenarios.master_seed": "null uses each scenario's canonical seed",
    "scenarios.spawn_region": "null uses episode.spawn_region",
    "output_dir": f"overridden by ${OUT_ENV_VAR}",
    "master_seed": "training seed",
    "workers": "worker processes; never changes results",
}


def _fields(cls):
    skip = _EXCLUDED.get(cls, set())
    return [f for f in fields(cls) if f.init and f.name not in skip]


def _check_scalar(value, kind, path):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return _tupled(value)
    return value


def _tupled(value):
    if isinstance(value, (list, tuple)):
        return tuple(_tupled(v) for v in value)
    return value


def _coerce(value, hint, path):
    args = typing.get_args(hint)
    if args and type(None) in args:
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
    return _check_scalar(value, hint, path)


def build(cls, data, path: str = ""):
    """Instantiate dataclass ``cls`` from a mapping, rejecting unknown keys."""
    where = path or "config"
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in _fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}; valid: {', '.join(known)}")
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        hint = hints[name]
        kwargs[name] = build(hint, value, sub) if is_dataclass(hint) else _coerce(value, hint, sub)
    if cls is RunConfig:
        neural = kwargs.get("neural", NeuralSection())
        kwargs["td3"] = _rebuild(TD3Config, kwargs.get("td3", TD3Config()), hidden_dims=neural.hidden_dims,
                                 path="td3")
    try:
        obj = cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if cls is RunConfig:
        _validate(obj)
    return obj


def _rebuild(cls, obj, path, **changes):
    values = {f.name: getattr(obj, f.name) for f in fields(cls) if f.init}
    values.update(changes)
    try:
        return cls(**values)
    except (ConfigError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.drone.validate(cfg.sim.gravity)
    except ConfigError as exc:
        raise ConfigError(f"drone: {exc}") from None
    for name in cfg.scenarios.names:
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"scenarios.names: unknown scenario {name!r}; valid: {', '.join(SCENARIO_NAMES)}")
    if cfg.train.scenario not in SCENARIO_NAMES:
        raise ConfigError(f"train.scenario: unknown scenario {cfg.train.scenario!r}; valid: {', '.join(SCENARIO_NAMES)}")
    if cfg.scenarios.episodes < 1:
        raise ConfigError("scenarios.episodes: must be >= 1")
    if cfg.train.total_steps < 0:
        raise ConfigError("train.total_steps: must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    if tuple(cfg.neural.hidden_dims) == () or any(int(h) < 1 for h in cfg.neural.hidden_dims):
        raise ConfigError("neural.hidden_dims: widths must be positive")
    try:
        cfg.train_scenario()
        for name in cfg.scenarios.names:
            cfg.scenario(name)
    except ConfigError as exc:
        raise ConfigError(f"scenarios: {exc}") from None


def to_dict(cfg) -> dict:
    """Plain nested dict (lists, not tuples) in field order, td3.hidden_dims omitted."""

    def plain(value):
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        if isinstance(value, dict):
            return {k: plain(v) for k, v in value.items()}
        return value

    def walk(obj):
        out = {}
        for f in _fields(type(obj)):
            value = getattr(obj, f.name)
            out[f.name] = walk(value) if is_dataclass(value) else plain(value)
        return out

    return walk(cfg)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars/lists."""
    data = dict(data or {})
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r}: expected dotted.key=value")
        try:
            value = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"override {item!r}: {part} is not a section")
            else:
                child = dict(child)
            node[part] = child
            node = child
        node[parts[-1]] = value
    return data


def parse_config(text: str, overrides=(), environ=None) -> RunConfig:
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    data = apply_overrides(data or {}, overrides)
    cfg = build(RunConfig, data)
    env = os.environ if environ is None else environ
    if env.get(OUT_ENV_VAR):
        cfg = _rebuild(RunConfig, cfg, path="output_dir", output_dir=env[OUT_ENV_VAR])
    return cfg


def load_config(path=None, overrides=(), environ=None) -> RunConfig:
    """Defaults when ``path`` is None; otherwise the file merged over them."""
    if path is None:
        return parse_config("", overrides, environ)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides, environ)


def _yaml_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return ".inf" if value > 0 else "-.inf"
        if math.isnan(value):
            return ".nan"
        text = repr(value)
        # YAML 1.1 floats need a dot in the mantissa.
        if "e" in text and "." not in text.split("e")[0]:
            mantissa, exp = text.split("e")
            text = f"{mantissa}.0e{exp}"
        return text
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_yaml_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def reference_config(cfg: RunConfig | None = None) -> str:
    """Commented YAML listing every key with its value; parses back to ``cfg``."""
    cfg = cfg or RunConfig()
    lines = [
        "# padfall run configuration.",
        "# Every key is optional; omitted keys take the values shown here.",
        "# Override any key on the command line with --set section.key=value.",
        "",
    ]

    def emit(obj, path, indent):
        for f in _fields(type(obj)):
            value = getattr(obj, f.name)
            key = f"{path}.{f.name}" if path else f.name
            pad = "  " * indent
            if is_dataclass(value):
                lines.append(f"{pad}{f.name}:")
                emit(value, key, indent + 1)
                if indent == 0:
                    lines.append("")
                continue
            lines.append(f"{pad}{f.name}: {_yaml_value(value)}  # {FIELD_DOCS[key]}")

    emit(cfg, "", 0)
    return "\n".join(lines).rstrip("\n") + "\n"


def recipe_path(name: str) -> Path:
    path = Path(__file__).parent / "recipes" / f"{name}.yaml"
    if not path.is_file():
        known = sorted(p.stem for p in path.parent.glob("*.yaml"))
        raise ConfigError(f"unknown recipe {name!r}; known: {', '.join(known)}")
    return path

