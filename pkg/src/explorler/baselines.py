"""Iteration-level candidate generators that stand in for ESA."""
from __future__ import annotations

import math

import numpy as np

from .esa import Candidate, run_esa
from .nn import FlatParams, gaussian_log_prob, unflatten
from .ppo import policy_gradient


def _values(p):
    return p.values if isinstance(p, FlatParams) else np.asarray(p, dtype=np.float64)


def checkpoint_average(checkpoints):
    """Coordinate-wise mean of parameter vectors (FlatParams or arrays)."""
    if len(checkpoints) == 0:
        raise ValueError("need at least one checkpoint")
    vecs = [_values(c) for c in checkpoints]
    if len({v.shape for v in vecs}) != 1:
        raise ValueError("checkpoints have different lengths")
    mean = np.mean(np.stack(vecs), axis=0)
    first = checkpoints[0]
    return first.with_values(mean) if isinstance(first, FlatParams) else mean


def random_walk_candidates(anchor, cfg, rng, num_agents):
    """Walkers leave ``anchor`` in uniformly random unit directions, on ESA's release schedule."""
    start = _values(anchor)
    dim = start.size
    positions = [start.copy() for _ in range(num_agents)]
    candidates = [Candidate(p.copy(), pid, "initial") for pid, p in enumerate(positions)]
    for step in range(1, cfg.num_steps + 1):
        for pid in range(num_agents):
            d = rng.standard_normal(dim)
            positions[pid] = positions[pid] + cfg.step_size * d / math.sqrt(float(d @ d))
        if step % cfg.release_interval == 0:
            candidates.extend(Candidate(positions[pid].copy(), pid, step) for pid in range(num_agents))
    return candidates


def pbt_step(population, evaluate, rng, noise_std=0.02):
    """One exploit/explore round on a fixed-size population.

    ``evaluate`` maps a parameter vector to its mean return. Returns
    ``(new_population, fitness_of_old_population, best_index)`` where
    ``best_index`` points into the *old* population (its best member is
    always carried over unchanged, at the same position in the new one).
    """
    size = len(population)
    if size < 2:
        raise ValueError("population needs at least two members")
    fitness = np.array([evaluate(p) for p in population])
    order = sorted(range(size), key=lambda i: (-fitness[i], i))
    n_top = size // 2
    top, bottom = order[:n_top], order[n_top:]
    new_pop = list(population)
    for i in bottom:
        parent = population[top[int(rng.integers(n_top))]]
        new_pop[i] = parent + noise_std * rng.standard_normal(parent.shape)
    return new_pop, fitness, order[0]


def guided_es_candidate(params, surrogate_grad, evaluate, sigma, n_pairs, mix, lr, rng, directions=None):
    """Blend the surrogate ascent direction with an antithetic ES gradient estimate.

    ``surrogate_grad`` is an ascent direction on the return (i.e. the negated
    PPO loss gradient). Both directions are unit-normalized before mixing.
    """
    theta = _values(params)
    if directions is None:
        directions = rng.standard_normal((n_pairs, theta.size))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    g_es = np.zeros_like(theta)
    for eps in directions:
        g_es += (evaluate(theta + sigma * eps) - evaluate(theta - sigma * eps)) * eps
    g_es /= 2.0 * sigma * len(directions)
    g = mix * _unit(np.asarray(surrogate_grad, dtype=np.float64)) + (1.0 - mix) * _unit(g_es)
    out = theta + lr * g
    return params.with_values(out) if isinstance(params, FlatParams) else out, g_es


def _unit(v):
    n = math.sqrt(float(v @ v))
    return v / n if n > 0 else np.zeros_like(v)


def vfs_objective_grad(policy, value_net, obs):
    """Gradient of ``mean_s V(s) * log pi(mu(s) | s)`` w.r.t. the policy parameters.

    The action is the (detached) policy mean, so the mean-network terms
    vanish and only log_std receives signal.
    """
    v = value_net(obs)
    mean, cache = policy.mean_net.forward(obs)
    action = mean.copy()
    inv_var = np.exp(-2.0 * policy.log_std)
    diff = action - mean
    w = v / len(obs)
    dmean = w[:, None] * diff * inv_var
    dlog_std = (w[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0)
    grads = policy.mean_net.backward(cache, dmean)
    grads.append(dlog_std)
    objective = float(np.mean(v * gaussian_log_prob(mean, policy.log_std, action)))
    return objective, np.concatenate([g.ravel() for g in grads])


def vfs_candidate(params, value_net, obs_sample, step_size=0.01, steps=3):
    """``steps`` plain gradient-ascent steps on the value-weighted log-likelihood."""
    theta = params.values.copy()
    for _ in range(steps):
        policy, _ = unflatten(params.with_values(theta))
        _, grad = vfs_objective_grad(policy, value_net, np.asarray(obs_sample, dtype=np.float64))
        theta = theta + step_size * grad
    return params.with_values(theta)


# -- generator objects used by the pipeline -----------------------------------

class Generator:
    name = "base"

    def propose(self, ctx):
        """Return a list of :class:`Candidate` (positions are policy-subspace vectors)."""
        raise NotImplementedError


class EsaGenerator(Generator):
    name = "explorler"

    def propose(self, ctx):
        anchors = np.stack([c.params.values for c in ctx.anchors])
        if len(anchors) < 2:
            # ESA needs a segment to start on; fall back to the iteration's epoch checkpoints
            anchors = np.stack([c.params.values for c in ctx.record.checkpoints])
        return run_esa(anchors, ctx.cfg.esa, ctx.rng, ctx.cfg.num_agents())


class CheckpointAvgGenerator(Generator):
    name = "checkpoint_avg"

    def propose(self, ctx):
        avg = checkpoint_average([c.params for c in ctx.record.checkpoints])
        return [Candidate(avg.values, 0, "average")]


class RandomWalkGenerator(Generator):
    name = "random_walk"

    def propose(self, ctx):
        return random_walk_candidates(ctx.record.anchor.params, ctx.cfg.esa, ctx.rng, ctx.cfg.num_agents())


class PbtGenerator(Generator):
    """Population persists across events; the newest anchor replaces the weakest member."""

    name = "pbt"

    def __init__(self):
        self.population = None
        self.fitness = None

    def propose(self, ctx):
        size = ctx.cfg.baselines.population_size
        if self.population is None:
            pool = [c.params.values for c in ctx.record.checkpoints][-size:]
            while len(pool) < size:
                pool.insert(0, pool[0])
            self.population = [p.copy() for p in pool]
        else:
            worst = min(range(size), key=lambda i: (self.fitness[i], -i))
            self.population[worst] = ctx.record.anchor.params.values.copy()
        self.population, self.fitness, best = pbt_step(
            self.population, lambda p: ctx.evaluate_vector(p), ctx.rng, ctx.cfg.baselines.pbt_noise)
        return [Candidate(self.population[best].copy(), best, "pbt_best")]


class GuidedEsGenerator(Generator):
    name = "guided_es"

    def propose(self, ctx):
        bcfg = ctx.cfg.baselines
        ascent = -policy_gradient(ctx.state.ac, ctx.record.buffer, ctx.cfg.ppo)
        cand, _ = guided_es_candidate(ctx.state.ac.policy_flat().values, ascent, ctx.evaluate_vector,
                                      bcfg.es_sigma, bcfg.es_pairs, bcfg.es_mix, ctx.cfg.ppo.learning_rate, ctx.rng)
        return [Candidate(cand, 0, "guided_es")]


class VfsGenerator(Generator):
    name = "vfs"

    def propose(self, ctx):
        bcfg = ctx.cfg.baselines
        obs = ctx.record.buffer.obs
        idx = ctx.rng.choice(len(obs), size=min(bcfg.vfs_obs_samples, len(obs)), replace=False)
        cand = vfs_candidate(ctx.state.ac.policy_flat(), ctx.state.ac.value, obs[idx],
                             bcfg.vfs_step_size, bcfg.vfs_steps)
        return [Candidate(cand.values, 0, "vfs")]


GENERATORS = {
    "explorler": EsaGenerator,
    "checkpoint_avg": CheckpointAvgGenerator,
    "random_walk": RandomWalkGenerator,
    "pbt": PbtGenerator,
    "guided_es": GuidedEsGenerator,
    "vfs": VfsGenerator,
}


def make_generator(method):
    if method == "none":
        return None
    try:
        return GENERATORS[method]()
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
