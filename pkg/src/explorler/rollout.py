"""On-policy trajectory collection and generalized advantage estimation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .nn import flatten, gaussian_log_prob

BUFFER_COLUMNS = ("obs", "action", "reward", "done", "log_prob", "value", "advantage", "return")


class EnvRunner:
    """Keeps an environment's episode going across successive rollouts."""

    def __init__(self, env):
        self.env = env
        self.obs = env.reset()
        self.episode_return = 0.0
        self.episode_length = 0

    def restart(self):
        self.obs = self.env.reset()
        self.episode_return = 0.0
        self.episode_length = 0


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    bootstrap_value: float
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    # position (number of steps into this rollout) at which each episode ended
    episode_ends: list = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self):
        return len(self.rewards)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BUFFER_COLUMNS)
            for t in range(len(self)):
                w.writerow([
                    " ".join(repr(float(v)) for v in self.obs[t]),
                    " ".join(repr(float(v)) for v in self.actions[t]),
                    repr(float(self.rewards[t])),
                    int(self.dones[t]),
                    repr(float(self.log_probs[t])),
                    repr(float(self.values[t])),
                    "" if self.advantages is None else repr(float(self.advantages[t])),
                    "" if self.returns is None else repr(float(self.returns[t])),
                ])


def collect_rollout(policy, value_net, runner, n_steps, rng, deterministic=False):
    """Run ``policy`` for exactly ``n_steps`` transitions, resetting on episode end.

    Exploration noise for the whole rollout is drawn up front; values and
    log-probabilities are computed in one batch after the environment loop.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    env = runner.env
    obs_buf = np.empty((n_steps, env.obs_dim))
    act_buf = np.empty((n_steps, env.act_dim))
    mean_buf = np.empty((n_steps, env.act_dim))
    rew_buf = np.empty(n_steps)
    done_buf = np.zeros(n_steps, dtype=bool)
    std = np.exp(policy.log_std)
    noise = np.zeros((n_steps, env.act_dim)) if deterministic else rng.standard_normal((n_steps, env.act_dim))
    ep_returns, ep_lengths, ep_ends = [], [], []
    mean_net = policy.mean_net

    for t in range(n_steps):
        obs = runner.obs
        mean = mean_net(obs)
        obs_buf[t] = obs
        mean_buf[t] = mean
        action = mean + std * noise[t]
        act_buf[t] = action
        if not np.all(np.isfinite(action)):
            _raise_non_finite(policy, value_net)
        result = env.step(action)
        rew_buf[t] = result.reward
        runner.episode_return += result.reward
        runner.episode_length += 1
        if result.done:
            done_buf[t] = True
            ep_returns.append(runner.episode_return)
            ep_lengths.append(runner.episode_length)
            ep_ends.append(t + 1)
            runner.restart()
        else:
            runner.obs = result.observation

    values = value_net(np.vstack([obs_buf, runner.obs[None, :]]))
    if not (np.all(np.isfinite(mean_buf)) and np.all(np.isfinite(values))):
        _raise_non_finite(policy, value_net)
    logp_buf = gaussian_log_prob(mean_buf, policy.log_std, act_buf)
    return RolloutBuffer(obs_buf, act_buf, rew_buf, done_buf, logp_buf, values[:-1].copy(), float(values[-1]),
                         ep_returns, ep_lengths, ep_ends)


def _raise_non_finite(policy, value_net):
    ck = flatten(policy, value_net).checksum()
    raise FloatingPointError(f"non-finite network output during rollout (params checksum {ck})")


def compute_gae(buffer, gamma, lam):
    """Backward GAE recursion; stores and returns ``(advantages, returns)``."""
    n = len(buffer)
    if n == 0:
        raise ValueError("empty buffer")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must be in [0, 1]")
    adv = np.empty(n)
    next_value = buffer.bootstrap_value
    last = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if buffer.dones[t] else 1.0
        delta = buffer.rewards[t] + gamma * nonterminal * next_value - buffer.values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
        next_value = buffer.values[t]
    buffer.advantages = adv
    buffer.returns = adv + buffer.values
    return buffer.advantages, buffer.returns


def normalize_advantages(adv, eps=1e-8):
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size <= 1:
        return adv - adv.mean() if adv.size else adv
    centered = adv - adv.mean()
    return centered / (centered.std() + eps)


def minibatch_iter(n, batch_size, rng):
    """Shuffled index batches; the trailing partial batch is dropped.

    ``n`` may be a length or anything sized (e.g. a :class:`RolloutBuffer`).
    """
    if not isinstance(n, (int, np.integer)):
        n = len(n)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds buffer length {n}")
    perm = rng.permutation(n)
    return [perm[k:k + batch_size] for k in range(0, n - batch_size + 1, batch_size)]
