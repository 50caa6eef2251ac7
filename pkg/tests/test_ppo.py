import math

import numpy as np
import pytest

from conftest import cached_run
from explorler.config import PpoConfig
from explorler.envs import make_env
from explorler.nn import GaussianPolicy, MlpNet, ValueNet, gaussian_log_prob
from explorler.ppo import ActorCritic, Adam, TrainerState, clip_grad_norm, ppo_loss, ppo_loss_and_grad, train_iteration
from explorler.rollout import EnvRunner


def _ac(seed=0):
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy(MlpNet((2, 4, 1), rng=rng), np.array([0.0]), [-5], [5])
    return ActorCritic(policy, ValueNet(MlpNet((2, 4, 1), rng=rng))), rng


def _one_sample(ratio, adv):
    ac, rng = _ac()
    obs = rng.normal(size=(1, 2))
    act = np.array([[0.3]])
    logp = gaussian_log_prob(ac.policy.mean_net(obs), ac.policy.log_std, act)
    old = logp - math.log(ratio)
    return ac, obs, act, old, np.array([adv], float)


@pytest.mark.parametrize("ratio, adv, expected", [(1.0, 1.0, -1.0), (1.5, 1.0, -1.2), (0.5, -1.0, 0.8)])
def test_policy_term_examples(ratio, adv, expected):
    ac, obs, act, old, a = _one_sample(ratio, adv)
    cfg = PpoConfig(clip_epsilon=0.2)
    total, policy_term, value_term, entropy = ppo_loss(ac, obs, act, old, a, np.zeros(1), cfg)
    assert policy_term == pytest.approx(expected, abs=1e-12)
    assert total == pytest.approx(policy_term + 0.5 * value_term, abs=1e-12)
    assert entropy == pytest.approx(1.4189385332046727)


@pytest.mark.parametrize("ratio, adv", [(1.5, 1.0), (0.5, -1.0)])
def test_clipped_sample_has_zero_policy_gradient(ratio, adv):
    ac, obs, act, old, a = _one_sample(ratio, adv)
    _, grad = ppo_loss_and_grad(ac, obs, act, old, a, np.zeros(1), PpoConfig(value_coef=0.0))
    assert not grad[:ac.n_policy].any()


def test_unclipped_sample_has_gradient():
    ac, obs, act, old, a = _one_sample(1.1, 1.0)
    _, grad = ppo_loss_and_grad(ac, obs, act, old, a, np.zeros(1), PpoConfig(value_coef=0.0))
    assert np.abs(grad[:ac.n_policy]).max() > 0


def test_non_finite_ratio_raises():
    ac, obs, act, old, a = _one_sample(1.0, 1.0)
    with pytest.raises(FloatingPointError):
        ppo_loss(ac, obs, act, old - 1e4, a, np.zeros(1), PpoConfig())


def test_clip_grad_norm():
    g, norm = clip_grad_norm(np.array([3.0, 4.0]), 0.5)
    assert norm == 5.0
    assert np.linalg.norm(g) == pytest.approx(0.5, rel=1e-6)
    g2, _ = clip_grad_norm(np.array([0.1, 0.0]), 0.5)
    assert np.array_equal(g2, [0.1, 0.0])


def test_adam_first_step_is_lr_sign():
    theta = np.zeros(3)
    opt = Adam(3)
    opt.step(theta, np.array([2.0, -0.5, 0.0]), 0.1)
    np.testing.assert_allclose(theta, [-0.1, 0.1, 0.0], atol=1e-7)
    opt.reset()
    assert opt.t == 0 and not opt.m.any()


def _state(seed=0, env_id="pendulum"):
    env = make_env(env_id, seed)
    rng = np.random.default_rng(seed)
    return TrainerState(ActorCritic.create(env, rng), EnvRunner(env), np.random.default_rng(seed + 1))


def test_zero_lr_checkpoints_identical():
    state = _state()
    before = state.ac.policy_flat()
    rec = train_iteration(state, PpoConfig(learning_rate=0.0, steps_per_rollout=128, batch_size=32, n_epochs=4))
    assert len(rec.checkpoints) == 4
    assert all(c.params == before for c in rec.checkpoints)
    assert rec.anchor is rec.checkpoints[-1]


def test_single_step_per_iteration():
    state = _state()
    cfg = PpoConfig(steps_per_rollout=64, batch_size=64, n_epochs=1)
    train_iteration(state, cfg)
    assert state.grad_steps == 1 and state.adam.t == 1
    assert state.env_steps == 64


def test_iteration_bit_identical():
    cfg = PpoConfig(steps_per_rollout=256, batch_size=64, n_epochs=3)
    a, b = _state(3), _state(3)
    for _ in range(2):
        ra, rb = train_iteration(a, cfg), train_iteration(b, cfg)
    assert all(x.params == y.params for x, y in zip(ra.checkpoints, rb.checkpoints))
    assert ra.episode_returns == rb.episode_returns
    assert a.ac.theta.tobytes() == b.ac.theta.tobytes()


def test_learning_changes_parameters_and_keeps_log_std_bounded():
    state = _state()
    cfg = PpoConfig(steps_per_rollout=128, batch_size=32, n_epochs=2, learning_rate=0.5)
    before = state.ac.theta.copy()
    rec = train_iteration(state, cfg)
    assert not np.array_equal(before, state.ac.theta)
    assert -20 <= state.ac.policy.log_std[0] <= 2
    assert rec.checkpoints[0].params != rec.checkpoints[1].params


def test_monotone_smoke_pendulum():
    # last 10 of 100 iterations beat the first 10, on at least 3 of 4 seeds
    wins = 0
    for seed in range(4):
        rets = [it["mean_episode_return"] for it in cached_run("pendulum", "none", seed).iterations[:100]]
        wins += np.mean(rets[-10:]) > np.mean(rets[:10])
    assert wins >= 3
