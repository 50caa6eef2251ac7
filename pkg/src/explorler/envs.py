"""Seeded continuous-control environments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PENDULUM_MAX_SPEED = 8.0
PENDULUM_MAX_TORQUE = 2.0
PENDULUM_DT = 0.05
PENDULUM_G = 10.0
PENDULUM_M = 1.0
PENDULUM_L = 1.0

POINTMASS_GOAL = np.array([0.8, 0.8])
POINTMASS_DISTRACTOR = np.array([-0.5, -0.5])
POINTMASS_MAX_SPEED = 0.1


def wrap_angle(theta):
    """Map an angle into (-pi, pi]."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    if w == -math.pi:
        w = math.pi
    return w


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool


def pendulum_step(theta, theta_dot, u):
    """One semi-implicit Euler step; returns (theta', theta_dot', reward)."""
    u = min(max(float(u), -PENDULUM_MAX_TORQUE), PENDULUM_MAX_TORQUE)
    reward = -(wrap_angle(theta) ** 2 + 0.1 * theta_dot ** 2 + 0.001 * u ** 2)
    new_dot = theta_dot + (3.0 * PENDULUM_G / (2.0 * PENDULUM_L)) * math.sin(theta) * PENDULUM_DT \
        + (3.0 / (PENDULUM_M * PENDULUM_L ** 2)) * u * PENDULUM_DT
    new_dot = min(max(new_dot, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
    return theta + new_dot * PENDULUM_DT, new_dot, reward


def pointmass_reward(p):
    d_goal = p - POINTMASS_GOAL
    d_trap = p - POINTMASS_DISTRACTOR
    return math.exp(-float(d_goal @ d_goal) / 0.02) + 0.4 * math.exp(-float(d_trap @ d_trap) / 0.005)


class Env:
    obs_dim: int
    act_dim: int
    horizon: int
    action_low: np.ndarray
    action_high: np.ndarray

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)
        self.t = 0

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self._reset_state()
        return self._obs()

    def step(self, action):
        action = np.asarray(action, dtype=np.float64).reshape(self.act_dim)
        if not np.all(np.isfinite(action)):
            raise ValueError(f"non-finite action {action!r}")
        action = np.clip(action, self.action_low, self.action_high)
        reward = self._advance(action)
        self.t += 1
        return StepResult(self._obs(), reward, self.t >= self.horizon)


class Pendulum(Env):
    obs_dim = 3
    act_dim = 1
    horizon = 200
    action_low = np.array([-PENDULUM_MAX_TORQUE])
    action_high = np.array([PENDULUM_MAX_TORQUE])

    theta = 0.0
    theta_dot = 0.0

    def _reset_state(self):
        self.theta = float(self.rng.uniform(-math.pi, math.pi))
        self.theta_dot = float(self.rng.uniform(-1.0, 1.0))

    def set_state(self, theta, theta_dot):
        self.theta, self.theta_dot = float(theta), float(theta_dot)
        return self._obs()

    def _obs(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def _advance(self, action):
        self.theta, self.theta_dot, reward = pendulum_step(self.theta, self.theta_dot, action[0])
        return reward

    def step(self, action):
        # scalar fast path; same semantics as Env.step
        u = float(action[0]) if np.ndim(action) else float(action)
        if not math.isfinite(u):
            raise ValueError(f"non-finite action {action!r}")
        self.theta, self.theta_dot, reward = pendulum_step(self.theta, self.theta_dot, u)
        self.t += 1
        return StepResult(self._obs(), reward, self.t >= self.horizon)


class PointMass(Env):
    """Two-attractor plane: a wide goal at (0.8, 0.8) and a weaker trap at (-0.5, -0.5)."""

    obs_dim = 2
    act_dim = 2
    horizon = 100
    action_low = -POINTMASS_MAX_SPEED * np.ones(2)
    action_high = POINTMASS_MAX_SPEED * np.ones(2)

    def _reset_state(self):
        self.pos = np.zeros(2)

    def _obs(self):
        return self.pos.copy()

    def _advance(self, action):
        self.pos = np.clip(self.pos + action, -1.0, 1.0)
        return pointmass_reward(self.pos)


ENVS = {"pendulum": Pendulum, "pointmass": PointMass}


def register_env(env_id, cls):
    ENVS[env_id] = cls


def env_class(env_id):
    try:
        return ENVS[env_id]
    except KeyError:
        raise ValueError(f"unknown env_id {env_id!r}; choose from {sorted(ENVS)}") from None


def make_env(env_id, seed=None):
    return env_class(env_id)(seed)


def env_reset(env_id, seed):
    """Stateless helper: observation after seeding a fresh env."""
    return make_env(env_id).reset(seed)
