"""PPO learner: clipped surrogate, value regression, entropy bonus, Adam updates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    FlatParams,
    GaussianPolicy,
    MlpNet,
    ValueNet,
    flatten,
    gaussian_entropy,
    gaussian_log_prob,
)
from .rollout import collect_rollout, compute_gae, minibatch_iter, normalize_advantages


class ActorCritic:
    """Policy and value nets whose arrays are views into one flat vector.

    The policy subspace (trunk, head, log_std) is the prefix ``theta[:n_policy]``.
    """

    def __init__(self, policy, value):
        flat = flatten(policy, value)
        self.layout = flat.layout
        self.theta = flat.values.copy()
        views = []
        offset = 0
        for _, shape in self.layout:
            n = int(np.prod(shape))
            views.append(self.theta[offset:offset + n].reshape(shape))
            offset += n
        n_pol = len(policy.params)
        self.policy = GaussianPolicy(MlpNet(policy.mean_net.sizes, views[:n_pol - 1]), views[n_pol - 1],
                                     policy.action_low, policy.action_high)
        self.value = ValueNet(MlpNet(value.net.sizes, views[n_pol:]))
        self.n_policy = sum(p.size for p in policy.params)
        self.policy_layout = self.layout[:n_pol]

    @classmethod
    def create(cls, env, rng, hidden=(64, 64), init_log_std=0.0):
        policy = GaussianPolicy.create(env.obs_dim, env.act_dim, env.action_low, env.action_high, rng, hidden)
        policy.log_std[:] = init_log_std
        value = ValueNet.create(env.obs_dim, rng, hidden)
        return cls(policy, value)

    def policy_flat(self):
        return FlatParams(self.theta[:self.n_policy].copy(), self.policy_layout)

    def full_flat(self):
        return FlatParams(self.theta.copy(), self.layout)

    def load_policy(self, flat):
        if flat.layout != self.policy_layout:
            raise ValueError("candidate layout does not match the policy subspace")
        self.theta[:self.n_policy] = flat.values
        self.clamp_log_std()

    def clamp_log_std(self):
        np.clip(self.policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.policy.log_std)


class Adam:
    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def reset(self):
        self.m[:] = 0.0
        self.v[:] = 0.0
        self.t = 0

    def step(self, theta, grad, lr):
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class LossTerms:
    total: float
    policy: float
    value: float
    entropy: float
    clip_fraction: float


def ppo_loss_and_grad(ac, obs, actions, old_log_probs, advantages, returns, cfg, need_grad=True):
    """Clipped PPO objective and its gradient w.r.t. ``ac.theta``.

    total = policy_term + value_coef * value_term - entropy_coef * entropy
    """
    policy, value = ac.policy, ac.value
    b = len(obs)
    mean, pcache = policy.mean_net.forward(obs)
    log_std = policy.log_std
    logp = gaussian_log_prob(mean, log_std, actions)
    with np.errstate(over="ignore"):
        ratio = np.exp(logp - old_log_probs)
    if not np.all(np.isfinite(ratio)):
        raise FloatingPointError("non-finite probability ratio (policy diverged)")
    eps = cfg.clip_epsilon
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    policy_term = -float(np.mean(np.minimum(surr1, surr2)))
    v, vcache = value.forward(obs)
    verr = v - returns
    value_term = float(np.mean(verr * verr))
    entropy = gaussian_entropy(log_std)
    total = policy_term + cfg.value_coef * value_term - cfg.entropy_coef * entropy
    clipped = surr2 < surr1
    terms = LossTerms(total, policy_term, value_term, entropy, float(np.mean(np.abs(ratio - 1.0) > eps)))
    if not need_grad:
        return terms, None

    # the unclipped branch is chosen on ties, where both branches agree in value and slope
    dlogp = np.where(clipped, 0.0, -advantages * ratio / b)
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    dmean = dlogp[:, None] * diff * inv_var
    dlog_std = (dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - cfg.entropy_coef
    dv = (2.0 * cfg.value_coef / b) * verr
    grads = policy.mean_net.backward(pcache, dmean)
    grads.append(dlog_std)
    grads += value.net.backward(vcache, dv[:, None])
    return terms, np.concatenate([g.ravel() for g in grads])


def ppo_loss(ac, obs, actions, old_log_probs, advantages, returns, cfg):
    """``(total, policy_term, value_term, entropy)`` without the gradient."""
    terms, _ = ppo_loss_and_grad(ac, obs, actions, old_log_probs, advantages, returns, cfg, need_grad=False)
    return terms.total, terms.policy, terms.value, terms.entropy


def clip_grad_norm(grad, max_norm):
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm:
        grad = grad * (max_norm / (norm + 1e-6))
    return grad, norm


@dataclass
class Checkpoint:
    params: FlatParams
    iteration: int
    epoch: int
    env_steps: int


@dataclass
class IterationRecord:
    iteration: int
    checkpoints: list
    episode_returns: list
    episode_ends: list
    env_steps: int
    policy_loss: float
    value_loss: float
    entropy: float
    buffer: object = field(default=None, repr=False)

    @property
    def mean_episode_return(self):
        return float(np.mean(self.episode_returns)) if self.episode_returns else float("nan")

    @property
    def anchor(self):
        return self.checkpoints[-1]


class TrainerState:
    """Everything a training loop mutates: parameters, optimizer, env, counters."""

    def __init__(self, ac, runner, sampling_rng, iteration=0, env_steps=0):
        self.ac = ac
        self.adam = Adam(ac.theta.size)
        self.runner = runner
        self.rng = sampling_rng
        self.iteration = iteration
        self.env_steps = env_steps
        self.grad_steps = 0


def train_iteration(state, cfg, rng=None):
    """Collect one rollout and run ``n_epochs`` passes of minibatch updates.

    A policy-subspace checkpoint is taken at the end of every epoch.
    """
    rng = state.rng if rng is None else rng
    ac = state.ac
    buffer = collect_rollout(ac.policy, ac.value, state.runner, cfg.steps_per_rollout, rng)
    compute_gae(buffer, cfg.gamma, cfg.gae_lambda)
    adv = normalize_advantages(buffer.advantages) if cfg.normalize_advantage else buffer.advantages
    start_steps = state.env_steps
    state.env_steps += len(buffer)
    state.iteration += 1

    checkpoints = []
    p_losses, v_losses, entropies = [], [], []
    for epoch in range(cfg.n_epochs):
        for idx in minibatch_iter(len(buffer), cfg.batch_size, rng):
            terms, grad = ppo_loss_and_grad(ac, buffer.obs[idx], buffer.actions[idx], buffer.log_probs[idx],
                                            adv[idx], buffer.returns[idx], cfg)
            grad, _ = clip_grad_norm(grad, cfg.max_grad_norm)
            state.adam.step(ac.theta, grad, cfg.learning_rate)
            ac.clamp_log_std()
            state.grad_steps += 1
            p_losses.append(terms.policy)
            v_losses.append(terms.value)
            entropies.append(terms.entropy)
        checkpoints.append(Checkpoint(ac.policy_flat(), state.iteration, epoch + 1, state.env_steps))

    return IterationRecord(
        iteration=state.iteration,
        checkpoints=checkpoints,
        episode_returns=list(buffer.episode_returns),
        episode_ends=[start_steps + e for e in buffer.episode_ends],
        env_steps=state.env_steps,
        policy_loss=float(np.mean(p_losses)),
        value_loss=float(np.mean(v_losses)),
        entropy=float(np.mean(entropies)),
        buffer=buffer,
    )


def policy_gradient(ac, buffer, cfg):
    """Full-buffer PPO surrogate gradient restricted to the policy subspace."""
    adv = normalize_advantages(buffer.advantages) if cfg.normalize_advantage else buffer.advantages
    _, grad = ppo_loss_and_grad(ac, buffer.obs, buffer.actions, buffer.log_probs, adv, buffer.returns, cfg)
    return grad[:ac.n_policy]
