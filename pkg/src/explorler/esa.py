"""Empty-space search: Lennard-Jones particles pushed away from anchor checkpoints."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import EsaConfig

LJ_MIN_RATIO = 2.0 ** (1.0 / 6.0)


@dataclass
class Particle:
    position: np.ndarray
    momentum: np.ndarray
    sigma: float
    rng: np.random.Generator = field(repr=False)
    releases: list = field(default_factory=list)


@dataclass
class Candidate:
    position: np.ndarray
    particle: int
    release: object  # step index, or "initial"

    @property
    def provenance(self):
        return {"particle": self.particle, "release": self.release}


def expected_candidate_count(num_agents, num_steps, release_interval):
    return num_agents * (num_steps // release_interval + 1)


def _as_matrix(anchors):
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim == 1:
        anchors = anchors[:, None]
    return anchors


def knn(point, anchors, n):
    """``n`` nearest anchors as ``[(index, distance), ...]``, ties to the lower index."""
    anchors = _as_matrix(anchors)
    if len(anchors) == 0:
        raise ValueError("empty anchor set")
    if not 1 <= n <= len(anchors):
        raise ValueError(f"need 1 <= n <= {len(anchors)} neighbours, got {n}")
    point = np.atleast_1d(np.asarray(point, dtype=np.float64))
    dist = np.sqrt(np.sum((anchors - point) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")[:n]
    return [(int(i), float(dist[i])) for i in order]


def lj_potential(r, sigma, lj_epsilon=1.0):
    if r <= 0:
        raise ValueError("distance must be positive")
    x6 = (sigma / r) ** 6
    return 4.0 * lj_epsilon * (x6 * x6 - x6)


def lj_force_magnitude(r, sigma, lj_epsilon=1.0):
    """Signed magnitude ``24 eps sigma [2 (sigma/r)^13 - (sigma/r)^7]``; positive repels."""
    if r <= 0:
        raise ValueError("distance must be positive")
    x = sigma / r
    x7 = x ** 7
    return 24.0 * lj_epsilon * sigma * (2.0 * x7 * x ** 6 - x7)


def lj_force(r, sigma, lj_epsilon, u_hat):
    u_hat = np.asarray(u_hat, dtype=np.float64)
    norm = float(np.sqrt(u_hat @ u_hat)) if u_hat.ndim else abs(float(u_hat))
    if not 1.0 - 1e-9 <= norm <= 1.0 + 1e-9:
        raise ValueError(f"u_hat must be a unit vector (norm {norm})")
    return lj_force_magnitude(r, sigma, lj_epsilon) * u_hat


def _random_unit(rng, dim):
    while True:
        v = rng.standard_normal(dim)
        n = math.sqrt(float(v @ v))
        if n > 0:
            return v / n


def mean_pairwise_distance(anchors):
    anchors = _as_matrix(anchors)
    k = len(anchors)
    if k < 2:
        return 0.0
    sq = np.sum(anchors * anchors, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * anchors @ anchors.T, 0.0)
    iu = np.triu_indices(k, 1)
    return float(np.mean(np.sqrt(d2[iu])))


def init_particles(anchors, cfg, rng, num_agents):
    """Particles on random anchor-pair segments plus a small isotropic jitter.

    The jitter is scaled per coordinate so its expected norm is
    ``jitter_scale`` times the mean pairwise anchor distance.
    """
    anchors = _as_matrix(anchors)
    k, dim = anchors.shape
    if k < 2:
        raise ValueError("need at least two anchors")
    n_nb = min(cfg.num_neighbors, k)
    jitter_std = cfg.jitter_scale * mean_pairwise_distance(anchors) / math.sqrt(dim)
    particles = []
    for pid in range(num_agents):
        i, j = rng.choice(k, size=2, replace=False)
        lam = rng.uniform(0.25, 0.75)
        pos = lam * anchors[i] + (1.0 - lam) * anchors[j]
        if jitter_std > 0:
            pos = pos + jitter_std * rng.standard_normal(dim)
        sigma = float(np.mean([d for _, d in knn(pos, anchors, n_nb)]))
        # each particle gets its own stream so results do not depend on update order
        sub = np.random.Generator(np.random.PCG64(int(rng.integers(0, 2**63 - 1))))
        particles.append(Particle(pos, np.zeros(dim), sigma, sub))
    return particles


def particle_force(position, anchors, n_neighbors, lj_epsilon, rng):
    """Summed LJ force from the nearest anchors and the updated sigma.

    An anchor at distance zero repels infinitely; any such anchors override
    the finite forces with a random unit direction each.
    """
    neighbours = knn(position, anchors, n_neighbors)
    sigma = float(np.mean([d for _, d in neighbours]))
    force = np.zeros_like(position)
    singular = np.zeros_like(position)
    n_singular = 0
    for idx, r in neighbours:
        if r == 0.0:
            singular += _random_unit(rng, position.size)
            n_singular += 1
            continue
        u_hat = (position - anchors[idx]) / r
        force += lj_force_magnitude(r, sigma, lj_epsilon) * u_hat
    return (singular if n_singular else force), sigma


def esa_step(particles, anchors, cfg):
    anchors = _as_matrix(anchors)
    n_nb = min(cfg.num_neighbors, len(anchors))
    beta = cfg.momentum_beta
    for p in particles:
        force, p.sigma = particle_force(p.position, anchors, n_nb, cfg.lj_epsilon, p.rng)
        fnorm = math.sqrt(float(force @ force))
        direction = force / fnorm if fnorm > 0 else np.zeros_like(force)
        p.momentum = beta * p.momentum + (1.0 - beta) * direction
        mnorm = math.sqrt(float(p.momentum @ p.momentum))
        if mnorm > 1e-12:
            p.position = p.position + cfg.step_size * (p.momentum / mnorm)
    return particles


def run_esa(anchors, cfg, rng, num_agents):
    """Initial positions plus every ``release_interval``-th step position, per particle."""
    anchors = _as_matrix(anchors)
    if len(anchors) == 0:
        raise ValueError("empty anchor set")
    particles = init_particles(anchors, cfg, rng, num_agents)
    candidates = [Candidate(p.position.copy(), pid, "initial") for pid, p in enumerate(particles)]
    for step in range(1, cfg.num_steps + 1):
        esa_step(particles, anchors, cfg)
        if step % cfg.release_interval == 0:
            for pid, p in enumerate(particles):
                p.releases.append(step)
                candidates.append(Candidate(p.position.copy(), pid, step))
    return candidates


__all__ = [
    "EsaConfig", "Particle", "Candidate", "knn", "lj_potential", "lj_force", "lj_force_magnitude",
    "init_particles", "esa_step", "run_esa", "expected_candidate_count", "mean_pairwise_distance",
]
