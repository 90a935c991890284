"""Advantage actor-critic training for the ABR policy."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .network import PROB_FLOOR, NetShape, PolicyParams, softmax
from .state import batch_features

log = logging.getLogger(__name__)

GAMMA = 0.99
LEARNING_RATE = 1e-4


class TrainingError(RuntimeError):
    pass


def advantage(rewards: Sequence[float], bootstrap: float, current: float, gamma: float = GAMMA) -> float:
    """n-step return from ``rewards`` plus discounted bootstrap, minus ``current``."""
    n = len(rewards)
    ret = sum(gamma ** k * r for k, r in enumerate(rewards))
    return float(ret + gamma ** n * bootstrap - current)


def nstep_returns(rewards, values, bootstrap: float, gamma: float, n: int) -> np.ndarray:
    """Return targets where ``values[t]`` is V(s_t) and V(s_T) = ``bootstrap``."""
    T = len(rewards)
    v = np.append(np.asarray(values, dtype=np.float64), bootstrap)
    out = np.empty(T)
    for t in range(T):
        k = min(n, T - t)
        disc = gamma ** np.arange(k)
        out[t] = disc @ np.asarray(rewards[t:t + k], dtype=np.float64) + gamma ** k * v[t + k]
    return out


@dataclass
class Trajectory:
    states: list
    actions: list
    rewards: list
    bootstrap_state: object = None  # None marks a terminal end


@dataclass
class StepStats:
    actor_loss: float
    critic_loss: float
    entropy: float


def compute_gradients(params: PolicyParams, traj: Trajectory, gamma=GAMMA, n_step=8,
                      entropy_weight=0.0, reward_scale=1.0):
    """Gradients (of the quantities to *minimize*) for actor and critic.

    Actor objective is sum_t A_t log pi(a_t|s_t) + w * H(pi(.|s_t)); critic
    loss is half the summed squared error to the n-step returns.
    """
    hist, scal = batch_features(traj.states)
    values, c_cache = params.critic.forward(hist, scal)
    values = values[:, 0].astype(np.float64)
    boot = 0.0
    if traj.bootstrap_state is not None:
        bh, bs = traj.bootstrap_state.features()
        boot = float(params.critic.forward(bh, bs)[0][0, 0])
    rewards = np.asarray(traj.rewards, dtype=np.float64) * reward_scale
    if not np.all(np.isfinite(rewards)) or not np.all(np.isfinite(values)):
        raise TrainingError("non-finite reward or value estimate")
    returns = nstep_returns(rewards, values, boot, gamma, n_step)
    adv = returns - values

    logits, a_cache = params.actor.forward(hist, scal)
    probs = softmax(logits.astype(np.float64))
    logp = np.log(np.maximum(probs, PROB_FLOOR))
    ent = -(probs * logp).sum(axis=1)
    acts = np.asarray(traj.actions)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(acts)), acts] = 1.0
    dJ = adv[:, None] * (onehot - probs) - entropy_weight * probs * (logp + ent[:, None])
    dtype = params.actor.dtype
    g_actor = params.actor.backward((-dJ).astype(dtype), a_cache)
    g_critic = params.critic.backward((values - returns)[:, None].astype(dtype), c_cache)

    for g in (g_actor, g_critic):
        for k, v in g.items():
            if not np.all(np.isfinite(v)):
                raise TrainingError(f"non-finite gradient in {k}")
    stats = StepStats(
        actor_loss=float(-(adv * logp[np.arange(len(acts)), acts]).sum()),
        critic_loss=float(0.5 * ((returns - values) ** 2).sum()),
        entropy=float(ent.mean()),
    )
    return g_actor, g_critic, stats


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict):
        for k, g in grads.items():
            params[k] -= (self.lr * g).astype(params[k].dtype)


class Adam:
    def __init__(self, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        for k, g in grads.items():
            g = g.astype(np.float64)
            m = self.m[k] = self.b1 * self.m.get(k, 0.0) + (1 - self.b1) * g
            v = self.v[k] = self.b2 * self.v.get(k, 0.0) + (1 - self.b2) * g * g
            mh = m / (1 - self.b1 ** self.t)
            vh = v / (1 - self.b2 ** self.t)
            params[k] -= (self.lr * mh / (np.sqrt(vh) + self.eps)).astype(params[k].dtype)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def policy_gradient_step(params: PolicyParams, trajectory: Trajectory, gamma=GAMMA, alpha_lr=LEARNING_RATE,
                         critic_lr=None, n_step=8, entropy_weight=0.0, reward_scale=1.0) -> PolicyParams:
    """One plain gradient-ascent update of a copy of ``params``."""
    new = params.copy()
    g_a, g_c, _ = compute_gradients(new, trajectory, gamma, n_step, entropy_weight, reward_scale)
    SGD(alpha_lr).step(new.actor.params, g_a)
    SGD(alpha_lr if critic_lr is None else critic_lr).step(new.critic.params, g_c)
    if not new.all_finite():
        raise TrainingError("update produced non-finite weights")
    return new


@dataclass
class TrainConfig:
    episodes: int = 2000
    seed: int = 0
    gamma: float = GAMMA
    actor_lr: float = LEARNING_RATE
    critic_lr: float = LEARNING_RATE
    n_step: int = 8
    update_every: int = 8  # steps per gradient update; 0 means once per episode
    entropy_start: float = 0.01
    entropy_end: float = 0.001
    reward_scale: float = 0.01
    optimizer: str = "adam"
    workers: int = 1
    validate_every: int = 100
    shape: NetShape = field(default_factory=NetShape)

    def entropy_weight(self, episode: int) -> float:
        frac = episode / max(self.episodes - 1, 1)
        return self.entropy_start + (self.entropy_end - self.entropy_start) * min(frac, 1.0)


def sample_action(params: PolicyParams, state, rng: np.random.Generator) -> int:
    h, s = state.features()
    probs = softmax(params.actor.forward(h, s)[0].astype(np.float64))[0]
    return int(rng.choice(len(probs), p=probs))


def greedy_action(params: PolicyParams, state) -> int:
    h, s = state.features()
    return int(np.argmax(params.actor.forward(h, s)[0][0]))


def rollout(env, params: PolicyParams, rng: np.random.Generator, state=None, max_steps: int = 0):
    """Sample actions from the current policy.

    Starts a new episode unless ``state`` is given and stops after
    ``max_steps`` steps (0: at the episode end). Returns the trajectory,
    whose ``bootstrap_state`` is set when the episode is not over, and
    whether the episode ended.
    """
    if state is None:
        state = env.reset(rng)
    traj = Trajectory([], [], [])
    done = False
    while not done and (max_steps <= 0 or len(traj.actions) < max_steps):
        a = sample_action(params, state, rng)
        nxt, r, done = env.step(a)
        traj.states.append(state)
        traj.actions.append(a)
        traj.rewards.append(r)
        state = nxt
    if not done:
        traj.bootstrap_state = state
    return traj, done


LOG_FIELDS = ("episode", "mean_reward", "actor_loss", "critic_loss", "entropy")


class Trainer:
    """Owns the parameters and optimizer state; workers only send gradients."""

    def __init__(self, config: TrainConfig, params: Optional[PolicyParams] = None):
        self.config = config
        self.params = params if params is not None else PolicyParams.init(config.seed, config.shape)
        self.actor_opt = make_optimizer(config.optimizer, config.actor_lr)
        self.critic_opt = make_optimizer(config.optimizer, config.critic_lr)

    def apply(self, g_actor, g_critic):
        self.actor_opt.step(self.params.actor.params, g_actor)
        self.critic_opt.step(self.params.critic.params, g_critic)
        if not self.params.all_finite():
            raise TrainingError("weights diverged")

    def _episode(self, env, params, rng, episode, apply=None):
        """Play one episode in segments of ``update_every`` steps.

        With ``apply`` each segment's gradients are applied at once (and
        ``params`` is the live set); otherwise they are returned for the
        caller to apply.
        """
        cfg = self.config
        rewards, grads = [], []
        a_loss = c_loss = ent = 0.0
        state, done = None, False
        while not done:
            traj, done = rollout(env, params, rng, state, cfg.update_every)
            state = traj.bootstrap_state
            g_a, g_c, stats = compute_gradients(params, traj, cfg.gamma, cfg.n_step,
                                                cfg.entropy_weight(episode), cfg.reward_scale)
            if apply is not None:
                apply(g_a, g_c)
            else:
                grads.append((g_a, g_c))
            rewards.extend(traj.rewards)
            a_loss += stats.actor_loss
            c_loss += stats.critic_loss
            ent += stats.entropy * len(traj.rewards)
        row = {"episode": episode, "mean_reward": float(np.mean(rewards)), "actor_loss": a_loss,
               "critic_loss": c_loss, "entropy": ent / len(rewards)}
        return row, grads

    def train(self, env_factory: Callable, validate: Optional[Callable] = None):
        """Run ``config.episodes`` episodes; returns (best params, log rows).

        ``validate(params) -> float`` scores a parameter set (higher is
        better); the best-scoring snapshot, the initial one included, is
        returned.
        """
        cfg = self.config
        rows = []
        best, best_score = self.params.copy(), None
        if validate is not None and cfg.episodes > 0:
            best_score = validate(self.params)
            log.info("initial validation score %.3f", best_score)

        def checkpoint(episode):
            nonlocal best, best_score
            if validate is None or (episode + 1) % cfg.validate_every and episode + 1 != cfg.episodes:
                return
            score = validate(self.params)
            log.info("episode %d validation %.3f", episode + 1, score)
            if best_score is None or score > best_score:
                best, best_score = self.params.copy(), score

        if cfg.workers <= 1:
            env = env_factory(0)
            rng = np.random.default_rng(cfg.seed)
            for ep in range(cfg.episodes):
                row, _ = self._episode(env, self.params, rng, ep, apply=self.apply)
                rows.append(row)
                checkpoint(ep)
        else:
            envs = [env_factory(w) for w in range(cfg.workers)]
            rngs = [np.random.default_rng([cfg.seed, w]) for w in range(cfg.workers)]
            ep = 0
            with ThreadPoolExecutor(cfg.workers) as pool:
                while ep < cfg.episodes:
                    snapshot = self.params.copy()
                    n = min(cfg.workers, cfg.episodes - ep)
                    futs = [pool.submit(self._episode, envs[w], snapshot, rngs[w], ep + w) for w in range(n)]
                    for fut in as_completed(futs):
                        row, grads = fut.result()
                        for g_a, g_c in grads:
                            self.apply(g_a, g_c)
                        row["episode"] = ep
                        rows.append(row)
                        checkpoint(ep)
                        ep += 1
        if validate is None:
            best = self.params.copy()
        return best, rows


def train(env_factory: Callable, config: TrainConfig, validate: Optional[Callable] = None,
          params: Optional[PolicyParams] = None):
    return Trainer(config, params).train(env_factory, validate)


def write_log(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=LOG_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
