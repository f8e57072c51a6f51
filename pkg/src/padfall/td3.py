"""Twin Delayed DDPG on top of the numpy MLP.

The learner keeps an actor, two critics and a target copy of each. Critic
targets use target-policy smoothing and the pessimistic minimum of the two
target critics; the actor and all targets move only every ``policy_delay``
critic updates.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from padfall.env import ACTION_DIM, OBS_DIM, TERMINAL_OUTCOMES, LandingEnv
from padfall.errors import ConfigError, NotReadyError, TrainingDivergedError
from padfall.neural import (
    AdamState,
    MlpSpec,
    ParamSet,
    adam_update,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    soft_update,
)
from padfall.seeding import stream

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "mean_eval_reward", "mean_episode_length", "critic_loss", "actor_loss", "eval_success_rate")


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int = 1_000_000, obs_dim: int = OBS_DIM, action_dim: int = ACTION_DIM):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, transition: Transition) -> "ReplayBuffer":
        i = self.cursor
        self.obs[i] = transition.obs
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.next_obs[i] = transition.next_obs
        self.dones[i] = float(transition.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return self

    def ordered(self) -> list:
        """Stored transitions oldest first."""
        start = self.cursor if self.size == self.capacity else 0
        idx = [(start + k) % self.capacity for k in range(self.size)]
        return [self._get(i) for i in idx]

    def _get(self, i: int) -> Transition:
        return Transition(self.obs[i].copy(), self.actions[i].copy(), float(self.rewards[i]),
                          self.next_obs[i].copy(), bool(self.dones[i]))

    def sample_indices(self, rng: np.random.Generator, batch_size: int, min_size: int = 1) -> np.ndarray:
        if self.size < max(min_size, 1):
            raise NotReadyError(f"buffer holds {self.size} transitions, need {max(min_size, 1)}")
        return rng.integers(0, self.size, size=batch_size)

    def sample_batch(self, rng: np.random.Generator, batch_size: int, min_size: int = 1) -> dict:
        idx = self.sample_indices(rng, batch_size, min_size)
        return {
            "obs": self.obs[idx],
            "action": self.actions[idx],
            "reward": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "done": self.dones[idx],
        }


@dataclass(frozen=True)
class TD3Config:
    batch_size: int = 100
    learning_starts: int = 100
    buffer_size: int = 1_000_000
    discount: float = 0.99
    soft_update_tau: float = 0.005
    policy_delay: int = 2
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise_std: float = 0.1
    actor_learning_rate: float = 1e-4
    critic_learning_rate: float = 1e-4
    hidden_dims: tuple = (512, 512, 256, 128)
    eval_interval: int = 10_000
    eval_episodes: int = 20
    # Stop once the last early_stop_evals evaluations all reach this success
    # rate. None trains for the full budget.
    early_stop_success: float | None = None
    early_stop_evals: int = 3

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not 0 < self.discount <= 1:
            raise ConfigError("discount must lie in (0, 1]")
        if not 0 < self.soft_update_tau <= 1:
            raise ConfigError("soft_update_tau must lie in (0, 1]")
        if self.policy_delay < 1:
            raise ConfigError("policy_delay must be >= 1")
        if self.batch_size < 1 or self.learning_starts < 0 or self.eval_interval < 1:
            raise ConfigError("batch_size and eval_interval must be >= 1, learning_starts >= 0")
        if self.early_stop_success is not None and not 0 < self.early_stop_success <= 1:
            raise ConfigError("early_stop_success must lie in (0, 1]")
        if self.early_stop_evals < 1:
            raise ConfigError("early_stop_evals must be >= 1")


@dataclass
class Networks:
    actor_spec: MlpSpec
    critic_spec: MlpSpec
    actor: ParamSet
    critic1: ParamSet
    critic2: ParamSet
    actor_target: ParamSet
    critic1_target: ParamSet
    critic2_target: ParamSet
    actor_opt: AdamState = None
    critic1_opt: AdamState = None
    critic2_opt: AdamState = None
    updates: int = 0

    @classmethod
    def initialize(cls, cfg: TD3Config, rng: np.random.Generator, obs_dim: int = OBS_DIM,
                   action_dim: int = ACTION_DIM) -> "Networks":
        a_spec = MlpSpec.actor(obs_dim, action_dim, cfg.hidden_dims)
        c_spec = MlpSpec.critic(obs_dim, action_dim, cfg.hidden_dims)
        actor = init_params(a_spec, rng)
        c1 = init_params(c_spec, rng)
        c2 = init_params(c_spec, rng)
        return cls(
            a_spec, c_spec, actor, c1, c2, actor.copy(), c1.copy(), c2.copy(),
            AdamState.zeros_like(actor, cfg.actor_learning_rate),
            AdamState.zeros_like(c1, cfg.critic_learning_rate),
            AdamState.zeros_like(c2, cfg.critic_learning_rate),
        )

    def act(self, obs) -> np.ndarray:
        return forward(self.actor, self.actor_spec, np.asarray(obs, dtype=np.float32))[0]


def _q(params: ParamSet, spec: MlpSpec, obs, action):
    return forward(params, spec, np.concatenate([obs, action], axis=-1).astype(np.float32, copy=False))


def critic_targets(batch: dict, nets: Networks, cfg: TD3Config, rng: np.random.Generator | None) -> np.ndarray:
    """``y = r + discount * (1 - done) * min(Q1', Q2')(s', clip(pi'(s') + eps))``.

    ``rng=None`` (or a zero noise std) disables the smoothing noise.
    """
    next_action = forward(nets.actor_target, nets.actor_spec, batch["next_obs"])[0]
    if rng is not None and cfg.target_noise_std > 0:
        noise = rng.normal(0.0, cfg.target_noise_std, size=next_action.shape)
        noise = np.clip(noise, -cfg.target_noise_clip, cfg.target_noise_clip)
        next_action = np.clip(next_action + noise, -1.0, 1.0).astype(np.float32)
    q1 = _q(nets.critic1_target, nets.critic_spec, batch["next_obs"], next_action)[0][:, 0]
    q2 = _q(nets.critic2_target, nets.critic_spec, batch["next_obs"], next_action)[0][:, 0]
    reward = np.asarray(batch["reward"], dtype=np.float32)
    done = np.asarray(batch["done"], dtype=np.float32)
    return reward + np.float32(cfg.discount) * (1.0 - done) * np.minimum(q1, q2)


def _critic_step(params, spec, opt, obs, action, targets):
    q, cache = _q(params, spec, obs, action)
    err = q[:, 0] - targets
    loss = float(np.mean(err.astype(np.float64) ** 2))
    grad_out = (2.0 / len(err)) * err[:, None]
    grads, _ = backward(params, spec, cache, grad_out.astype(q.dtype))
    params, opt = adam_update(params, grads, opt)
    return params, opt, loss


def update_critics(nets: Networks, batch: dict, targets: np.ndarray) -> float:
    """One Adam step per critic on mean squared TD error; returns the mean of the two losses."""
    targets = np.asarray(targets, dtype=np.float32)
    nets.critic1, nets.critic1_opt, l1 = _critic_step(
        nets.critic1, nets.critic_spec, nets.critic1_opt, batch["obs"], batch["action"], targets)
    nets.critic2, nets.critic2_opt, l2 = _critic_step(
        nets.critic2, nets.critic_spec, nets.critic2_opt, batch["obs"], batch["action"], targets)
    return 0.5 * (l1 + l2)


def update_actor_and_targets(nets: Networks, batch: dict, cfg: TD3Config, step_index: int) -> float | None:
    """Delayed policy step plus soft target updates.

    Does nothing unless ``step_index % policy_delay == 0``. Returns the actor
    loss (negative mean Q1) when an update happened.
    """
    if step_index % cfg.policy_delay != 0:
        return None
    obs = batch["obs"]
    action, a_cache = forward(nets.actor, nets.actor_spec, obs)
    q, q_cache = _q(nets.critic1, nets.critic_spec, obs, action)
    loss = -float(np.mean(q, dtype=np.float64))
    _, dq_din = backward(nets.critic1, nets.critic_spec, q_cache, np.full_like(q, -1.0 / len(q)))
    grads, _ = backward(nets.actor, nets.actor_spec, a_cache, dq_din[:, -nets.actor_spec.output_dim:])
    nets.actor, nets.actor_opt = adam_update(nets.actor, grads, nets.actor_opt)
    tau = cfg.soft_update_tau
    nets.actor_target = soft_update(nets.actor_target, nets.actor, tau)
    nets.critic1_target = soft_update(nets.critic1_target, nets.critic1, tau)
    nets.critic2_target = soft_update(nets.critic2_target, nets.critic2, tau)
    return loss


def learner_step(nets: Networks, buffer: ReplayBuffer, cfg: TD3Config, rng: np.random.Generator):
    batch = buffer.sample_batch(rng, cfg.batch_size, cfg.learning_starts)
    y = critic_targets(batch, nets, cfg, rng)
    critic_loss = update_critics(nets, batch, y)
    nets.updates += 1
    actor_loss = update_actor_and_targets(nets, batch, cfg, nets.updates)
    return critic_loss, actor_loss


def evaluate_policy(nets: Networks, env: LandingEnv, scenario, episodes: int, master_seed: int):
    """Noise-free rollouts on fixed episode indices; returns (mean return, mean length, success rate)."""
    returns, lengths, landed = [], [], 0
    for i in range(episodes):
        obs = env.reset(scenario, master_seed, i)
        total, n = 0.0, 0
        while True:
            res = env.step(nets.act(obs))
            total += res.reward
            n += 1
            obs = res.observation
            if res.terminated:
                landed += res.outcome == "landed"
                break
        returns.append(total)
        lengths.append(n)
    return float(np.mean(returns)), float(np.mean(lengths)), landed / episodes


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def write_checkpoint(directory, nets: Networks, manifest: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(directory / "actor.pfw", nets.actor, nets.actor_spec)
    save_checkpoint(directory / "critic1.pfw", nets.critic1, nets.critic_spec)
    save_checkpoint(directory / "critic2.pfw", nets.critic2, nets.critic_spec)
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


def read_policy(directory):
    """Actor parameters and spec from a checkpoint directory (or a bare ``.pfw`` file)."""
    path = Path(directory)
    if path.is_dir():
        path = path / "actor.pfw"
    return load_checkpoint(path)


@dataclass
class TrainResult:
    networks: Networks
    log: list = field(default_factory=list)
    episodes: int = 0
    steps: int = 0


def _as_schedule(schedule, total_steps):
    if isinstance(schedule, (list, tuple)) and schedule and isinstance(schedule[0], (list, tuple)):
        return [(s, int(n)) for s, n in schedule]
    return [(schedule, int(total_steps))]


def train(env_factory, schedule, cfg: TD3Config, total_steps: int, master_seed: int,
          eval_scenario=None, out_dir=None, workers: int = 1, progress: bool = False,
          digest: str | None = None) -> TrainResult:
    """Interleave environment steps and learner updates.

    ``schedule`` is a scenario or a list of ``(scenario, steps)`` stages run in
    order; ``total_steps`` caps the sum. Returns the trained networks and the
    evaluation log (one row per ``eval_interval`` steps). With ``out_dir`` set,
    every evaluation also writes ``checkpoints/step_<n>`` and ``final`` holds
    the last networks.
    """
    if total_steps < 0:
        raise ConfigError("total_steps must be >= 0")
    stages = _as_schedule(schedule, total_steps)
    env = env_factory()
    nets = Networks.initialize(cfg, stream(master_seed, "init"))
    buffer = ReplayBuffer(cfg.buffer_size)
    learn_rng = stream(master_seed, "learner")
    explore_rng = stream(master_seed, "explore")
    eval_scenario = eval_scenario or stages[0][0]
    eval_seed = master_seed + 1_000_003
    result = TrainResult(nets)
    digest = digest or config_hash(asdict(cfg))

    def manifest(at):
        return {"config_hash": digest, "step": at, "seed": master_seed}

    if out_dir is not None:
        write_training_log(Path(out_dir) / "training_log.csv", result.log)

    step = 0
    episode = 0
    losses_c, losses_a = [], []
    stopped = False
    for scenario, budget in stages:
        if stopped:
            break
        stage_end = min(step + budget, total_steps)
        if step >= stage_end:
            continue
        obs = env.reset(scenario, master_seed, episode)
        while step < stage_end:
            if step < cfg.learning_starts:
                action = explore_rng.uniform(-1.0, 1.0, size=ACTION_DIM)
            else:
                action = nets.act(obs) + explore_rng.normal(0.0, cfg.exploration_noise_std, size=ACTION_DIM)
                action = np.clip(action, -1.0, 1.0)
            res = env.step(action)
            buffer.push(Transition(obs, action, res.reward, res.observation, res.outcome in TERMINAL_OUTCOMES))
            step += 1
            if res.terminated:
                episode += 1
                obs = env.reset(scenario, master_seed, episode)
            else:
                obs = res.observation
            if step > cfg.learning_starts and buffer.size >= max(cfg.learning_starts, 1):
                c_loss, a_loss = learner_step(nets, buffer, cfg, learn_rng)
                if not math.isfinite(c_loss) or (a_loss is not None and not math.isfinite(a_loss)):
                    _dump_divergence(out_dir, step, c_loss, a_loss, nets)
                    raise TrainingDivergedError(f"non-finite loss at step {step}: critic={c_loss}, actor={a_loss}")
                losses_c.append(c_loss)
                if a_loss is not None:
                    losses_a.append(a_loss)
            if step % cfg.eval_interval == 0:
                mean_r, mean_len, success = _evaluate(nets, env_factory, eval_scenario, cfg.eval_episodes,
                                                      eval_seed, workers)
                row = {
                    "step": step,
                    "mean_eval_reward": mean_r,
                    "mean_episode_length": mean_len,
                    "critic_loss": float(np.mean(losses_c)) if losses_c else float("nan"),
                    "actor_loss": float(np.mean(losses_a)) if losses_a else float("nan"),
                    "eval_success_rate": success,
                }
                result.log.append(row)
                losses_c, losses_a = [], []
                if progress:
                    log.info("step %d reward %.3f len %.1f success %.2f", step, mean_r, mean_len, success)
                if out_dir is not None:
                    write_training_log(Path(out_dir) / "training_log.csv", result.log)
                    write_checkpoint(Path(out_dir) / "checkpoints" / f"step_{step:08d}", nets, manifest(step))
                if _converged(result.log, cfg):
                    stopped = True
                    if progress:
                        log.info("early stop at step %d", step)
                    break
    if out_dir is not None:
        write_checkpoint(Path(out_dir) / "final", nets, manifest(step))
    result.episodes = episode
    result.steps = step
    return result


def _converged(rows, cfg: TD3Config) -> bool:
    k = cfg.early_stop_evals
    if cfg.early_stop_success is None or len(rows) < k:
        return False
    return all(r["eval_success_rate"] >= cfg.early_stop_success for r in rows[-k:])


def _evaluate(nets, env_factory, scenario, episodes, seed, workers):
    if workers <= 1:
        return evaluate_policy(nets, env_factory(), scenario, episodes, seed)
    from padfall.evaluation import NetworkPolicy, run_episodes

    records = run_episodes(NetworkPolicy(nets.actor, nets.actor_spec), scenario, range(episodes),
                           env_factory=env_factory, master_seed=seed, workers=workers)
    returns = [sum(r.rewards) for r in records]
    lengths = [len(r.rows) for r in records]
    return float(np.mean(returns)), float(np.mean(lengths)), sum(r.outcome == "landed" for r in records) / episodes


def _dump_divergence(out_dir, step, c_loss, a_loss, nets):
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "divergence_dump.json", "w") as fh:
        json.dump({
            "step": step,
            "critic_loss": repr(c_loss),
            "actor_loss": repr(a_loss),
            "finite": {name: getattr(nets, name).is_finite()
                       for name in ("actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target")},
        }, fh, indent=2)


def write_training_log(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([row["step"]] + [repr(float(row[c])) for c in LOG_COLUMNS[1:]])


class TD3Lander(BaseEstimator):
    """Estimator wrapper: ``fit`` trains on a scenario schedule, ``predict`` maps
    normalized observations to actions in ``[-1, 1]``.
    """

    def __init__(self, hidden_dims=(512, 512, 256, 128), batch_size=100, learning_starts=100,
                 buffer_size=1_000_000, discount=0.99, tau=0.005, policy_delay=2, target_noise_std=0.2,
                 target_noise_clip=0.5, exploration_noise_std=0.1, learning_rate=1e-4, total_steps=100_000,
                 eval_interval=10_000, eval_episodes=20, early_stop_success=None, early_stop_evals=3,
                 random_state=0, workers=1, env_kwargs=None):
        self.hidden_dims = hidden_dims
        self.batch_size = batch_size
        self.learning_starts = learning_starts
        self.buffer_size = buffer_size
        self.discount = discount
        self.tau = tau
        self.policy_delay = policy_delay
        self.target_noise_std = target_noise_std
        self.target_noise_clip = target_noise_clip
        self.exploration_noise_std = exploration_noise_std
        self.learning_rate = learning_rate
        self.total_steps = total_steps
        self.eval_interval = eval_interval
        self.eval_episodes = eval_episodes
        self.early_stop_success = early_stop_success
        self.early_stop_evals = early_stop_evals
        self.random_state = random_state
        self.workers = workers
        self.env_kwargs = env_kwargs

    def td3_config(self) -> TD3Config:
        return TD3Config(
            batch_size=self.batch_size, learning_starts=self.learning_starts, buffer_size=self.buffer_size,
            discount=self.discount, soft_update_tau=self.tau, policy_delay=self.policy_delay,
            target_noise_std=self.target_noise_std, target_noise_clip=self.target_noise_clip,
            exploration_noise_std=self.exploration_noise_std, actor_learning_rate=self.learning_rate,
            critic_learning_rate=self.learning_rate, hidden_dims=tuple(self.hidden_dims),
            eval_interval=self.eval_interval, eval_episodes=self.eval_episodes,
            early_stop_success=self.early_stop_success, early_stop_evals=self.early_stop_evals,
        )

    def _env_factory(self):
        kwargs = dict(self.env_kwargs or {})
        return lambda: LandingEnv(**kwargs)

    def fit(self, X, y=None, eval_scenario=None, out_dir=None):
        """``X`` is a scenario or a list of ``(scenario, steps)`` stages."""
        cfg = self.td3_config()
        result = train(self._env_factory(), X, cfg, self.total_steps, self.random_state,
                       eval_scenario=eval_scenario, out_dir=out_dir, workers=self.workers)
        self.networks_ = result.networks
        self.training_log_ = result.log
        self.n_steps_ = result.steps
        self.n_episodes_ = result.episodes
        return self

    def _check_fitted(self):
        if not hasattr(self, "networks_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("TD3Lander is not fitted; call fit() or load()")

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=np.float32)
        if X.shape[-1] != OBS_DIM:
            raise ValueError(f"expected {OBS_DIM} observation features, got {X.shape[-1]}")
        return self.networks_.act(X)

    def score(self, X, y=None):
        """Landing success rate over the scenario's episodes."""
        from padfall.evaluation import NetworkPolicy, landing_metrics, run_episodes

        self._check_fitted()
        records = run_episodes(NetworkPolicy(self.networks_.actor, self.networks_.actor_spec), X,
                               range(X.episodes), env_factory=self._env_factory(), workers=self.workers)
        return landing_metrics(records)["success_rate"]

    def save(self, directory, extra_manifest: dict | None = None) -> Path:
        self._check_fitted()
        params = self.get_params()
        params.pop("env_kwargs", None)
        manifest = {
            "format": "padfall-td3/1",
            "config_hash": config_hash(params),
            "step": getattr(self, "n_steps_", 0),
            "seed": self.random_state,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()},
        }
        manifest.update(extra_manifest or {})
        return write_checkpoint(directory, self.networks_, manifest)

    @classmethod
    def load(cls, directory) -> "TD3Lander":
        directory = Path(directory)
        with open(directory / "manifest.json") as fh:
            manifest = json.load(fh)
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in manifest.get("params", {}).items()}
        est = cls(**params)
        actor, a_spec = load_checkpoint(directory / "actor.pfw")
        c1, c_spec = load_checkpoint(directory / "critic1.pfw")
        c2, _ = load_checkpoint(directory / "critic2.pfw")
        est.networks_ = Networks(a_spec, c_spec, actor, c1, c2, actor.copy(), c1.copy(), c2.copy())
        est.n_steps_ = manifest.get("step", 0)
        return est
