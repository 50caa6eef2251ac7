"""Online policy value estimate: mean undiscounted return over a few seeded episodes."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .envs import make_env
from .nn import unflatten


@dataclass
class EvalReport:
    candidate_id: int
    returns: list
    mean_return: float
    seeds: list
    lengths: list
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self))


def discounted_return(rewards, gamma):
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total


def run_episode(policy, env, seed, deterministic=True, rng=None):
    obs = env.reset(seed)
    mean_net = policy.mean_net
    std = np.exp(policy.log_std)
    total, length = 0.0, 0
    while True:
        mean = mean_net(obs)
        action = mean if deterministic else mean + std * rng.standard_normal(mean.shape)
        step = env.step(policy.clip_action(action))
        total += step.reward
        length += 1
        if step.done:
            return total, length
        obs = step.observation


def evaluate_policy(candidate, env_id, episodes, seed_set, action_mode="deterministic",
                    candidate_id=0, provenance=None):
    """Score a policy-subspace FlatParams by its mean return over ``seed_set``."""
    seed_set = [int(s) for s in seed_set]
    if len(seed_set) != episodes:
        raise ValueError(f"seed_set has {len(seed_set)} seeds for {episodes} episodes")
    env = make_env(env_id)
    try:
        policy, _ = unflatten(candidate, env.action_low, env.action_high)
    except ValueError as exc:
        raise ValueError(f"candidate {candidate_id}: {exc}") from exc
    if policy.obs_dim != env.obs_dim or policy.act_dim != env.act_dim:
        raise ValueError(f"candidate {candidate_id}: network shape does not fit env {env_id!r}")
    deterministic = action_mode == "deterministic"
    returns, lengths = [], []
    for seed in seed_set:
        rng = None if deterministic else np.random.default_rng(seed)
        ret, length = run_episode(policy, env, seed, deterministic, rng)
        returns.append(float(ret))
        lengths.append(int(length))
    if not np.all(np.isfinite(returns)):
        raise FloatingPointError(f"candidate {candidate_id}: non-finite return")
    return EvalReport(candidate_id, returns, float(np.mean(returns)), seed_set, lengths, dict(provenance or {}))


def rank_candidates(reports):
    """Id of the report with the highest mean return; ties go to the lowest id."""
    if not reports:
        raise ValueError("no reports to rank")
    best = min(reports, key=lambda r: (-r.mean_return, r.candidate_id))
    return best.candidate_id


class Evaluator:
    """Shared-seed evaluation with an env-step ledger.

    ``new_event()`` draws a fresh seed set; every call to :meth:`evaluate`
    until the next event uses that same set (paired comparison).
    """

    def __init__(self, env_id, episodes, rng, action_mode="deterministic"):
        self.env_id = env_id
        self.episodes = episodes
        self.rng = rng
        self.action_mode = action_mode
        self.steps_used = 0
        self.episodes_used = 0
        self.seed_set = None
        self.new_event()

    def new_event(self):
        self.seed_set = [int(s) for s in self.rng.integers(0, 2**31 - 1, size=self.episodes)]
        return self.seed_set

    def evaluate(self, flat, candidate_id=0, provenance=None):
        report = evaluate_policy(flat, self.env_id, self.episodes, self.seed_set, self.action_mode,
                                 candidate_id, provenance)
        self.steps_used += sum(report.lengths)
        self.episodes_used += len(report.lengths)
        return report

    def mean_return(self, flat):
        return self.evaluate(flat).mean_return
