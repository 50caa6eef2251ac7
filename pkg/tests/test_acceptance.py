"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Long training runs are shared through the session cache in conftest, so
the whole file takes several minutes on one CPU.
"""
import math
import sys
import time

import numpy as np
import pytest

from conftest import cached_run
from explorler.cli import curve_stats, main, mean_std
from explorler.config import EsaConfig, PpoConfig, config_from_dict
from explorler.esa import LJ_MIN_RATIO, Particle, esa_step, lj_force_magnitude, lj_potential
from explorler.experiments import compare_esa_random_walk
from explorler.nn import GaussianPolicy, ValueNet, flatten, unflatten
from explorler.ppo import ppo_loss_and_grad
from explorler.rollout import compute_gae

SEEDS = (0, 1, 2, 3)
WINDOW = 10


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def _max_smoothed(env, method, seed):
    return curve_stats(cached_run(env, method, seed).curve.train_returns(), WINDOW)[0]


def _final_window(env, method, seed):
    return curve_stats(cached_run(env, method, seed).curve.train_returns(), WINDOW)[1]


def test_criterion_1_ppo_pendulum(capsys):
    scores = [_max_smoothed("pendulum", "none", s) for s in SEEDS]
    m, sd = mean_std(scores)
    steps = cached_run("pendulum", "none", 0).state.env_steps
    ok = m >= -250.0
    report(capsys, 1, ok, f"PPO Pendulum max-smoothed {m:.2f} +/- {sd:.2f} over {len(SEEDS)} seeds "
                          f"({steps} env steps/seed), threshold -250; per seed {np.round(scores, 2).tolist()}")
    assert ok


def test_criterion_2_explorler_parity_and_escape(capsys):
    ppo = [_max_smoothed("pendulum", "none", s) for s in SEEDS]
    exp = [_max_smoothed("pendulum", "explorler", s) for s in SEEDS]
    pm, ps = mean_std(ppo)
    em, es = mean_std(exp)
    pooled = math.sqrt((ps ** 2 + es ** 2) / 2.0)
    parity = em >= pm - pooled

    ppo_final = [_final_window("pointmass", "none", s) for s in SEEDS]
    exp_final = [_final_window("pointmass", "explorler", s) for s in SEEDS]
    wins = sum(e > p for e, p in zip(exp_final, ppo_final))
    escape = wins >= 3
    ok = parity and escape
    report(capsys, 2, ok,
           f"Pendulum ExploRLer {em:.2f} +/- {es:.2f} vs PPO {pm:.2f} +/- {ps:.2f} (pooled std {pooled:.2f}, "
           f"parity {'ok' if parity else 'not met'}); PointMass final-window ExploRLer "
           f"{np.round(exp_final, 2).tolist()} vs PPO {np.round(ppo_final, 2).tolist()}: {wins}/4 wins "
           f"(need 3, {'ok' if escape else 'not met'})")
    assert ok


def test_criterion_3_candidate_accounting(capsys):
    cfg = config_from_dict({"pipeline": {"total_iterations": 10, "esa_trigger_interval": 10}})
    from explorler.pipeline import run_explorler

    res = run_explorler(cfg, 0)
    ev = res.events[0]
    ok = (cfg.ppo.n_epochs, cfg.num_agents(), len(res.events), ev.num_candidates, ev.eval_episodes) == \
        (10, 5, 1, 20, 60)
    report(capsys, 3, ok, f"n_epochs=10, m={cfg.num_agents()}: {len(res.events)} event, "
                          f"{ev.num_candidates} candidates, {ev.eval_episodes} evaluation episodes")
    assert ok


def test_criterion_4_esa_vs_random_walk(capsys):
    cfg = config_from_dict({"env": "pointmass"})
    rows = []
    for s in SEEDS:
        comp = compare_esa_random_walk(cfg, s, cached_run("pointmass", "none", s))
        assert comp.candidates_per_event["explorler"] == comp.candidates_per_event["random_walk"]
        rows.append((comp.mean_best("explorler"), comp.mean_best("random_walk")))
    wins = sum(e >= r for e, r in rows)
    ok = wins >= 3
    report(capsys, 4, ok, f"PointMass selected-candidate mean ESA vs random walk per seed "
                          f"{[(round(e, 2), round(r, 2)) for e, r in rows]}: ESA >= RW on {wins}/4 (need 3)")
    assert ok


def _numerical_oracles():
    from test_nn import _central_diff, _tiny_actor_critic
    from test_rollout import gae_oracle, make_buffer

    failures = []
    # GAE against the truncated-sum oracle on 100 random buffers
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = 20
        r, v = rng.normal(size=n), rng.normal(size=n)
        d = rng.random(n) < 0.15
        b, gamma, lam = rng.normal(), rng.uniform(0, 0.999), rng.uniform(0, 1)
        adv, _ = compute_gae(make_buffer(r, v, d, b), gamma, lam)
        if np.abs(adv - gae_oracle(r, v, d, b, gamma, lam)).max() > 1e-10:
            failures.append("gae")
            break
    # PPO gradient vs finite differences, both clip branches
    for shift in (0.0, 0.8):
        ac, rng2 = _tiny_actor_critic(2)
        cfg = PpoConfig(entropy_coef=0.01)
        obs = rng2.normal(size=(16, 2))
        mean = ac.policy.mean_net(obs)
        act = mean + np.exp(ac.policy.log_std) * rng2.normal(size=(16, 1))
        from explorler.nn import gaussian_log_prob

        old = gaussian_log_prob(mean, ac.policy.log_std, act) + rng2.uniform(-shift, shift, size=16)
        adv, ret = rng2.normal(size=16), rng2.normal(size=16)
        terms, grad = ppo_loss_and_grad(ac, obs, act, old, adv, ret, cfg)
        num = _central_diff(lambda: ppo_loss_and_grad(ac, obs, act, old, adv, ret, cfg, False)[0].total, ac.theta)
        rel = np.abs(grad - num) / np.maximum(1e-8, np.abs(grad) + np.abs(num))
        if rel.max() >= 1e-4 or (shift > 0) != (terms.clip_fraction > 0):
            failures.append(f"ppo-grad shift={shift}")
    # Lennard-Jones landmarks
    for sigma in (0.5, 1.0, 3.0):
        if abs(lj_potential(sigma, sigma)) > 1e-9 or abs(lj_potential(LJ_MIN_RATIO * sigma, sigma) + 1) > 1e-9:
            failures.append("lj-potential")
        if not (lj_force_magnitude(LJ_MIN_RATIO * sigma * 0.999, sigma) > 0 >
                lj_force_magnitude(LJ_MIN_RATIO * sigma * 1.001, sigma)):
            failures.append("lj-sign")
    # ESA step length
    rng3 = np.random.default_rng(5)
    anchors = rng3.normal(size=(8, 6))
    particles = [Particle(rng3.normal(size=6), np.zeros(6), 1.0, np.random.default_rng(i)) for i in range(4)]
    for _ in range(20):
        before = [p.position.copy() for p in particles]
        esa_step(particles, anchors, EsaConfig())
        for b0, p in zip(before, particles):
            dist = np.linalg.norm(p.position - b0)
            if not (dist == 0.0 or abs(dist - 0.001) < 1e-12):
                failures.append("esa-step")
    # flatten / unflatten bit identity
    rng4 = np.random.default_rng(6)
    flat = flatten(GaussianPolicy.create(3, 1, [-2], [2], rng4), ValueNet.create(3, rng4))
    p, v = unflatten(flat)
    if flatten(p, v).values.tobytes() != flat.values.tobytes():
        failures.append("flatten")
    # checkpoint average
    from explorler.baselines import checkpoint_average

    if not np.array_equal(checkpoint_average([np.array([0., 2.]), np.array([2., 0.]), np.array([4., 4.])]), [2, 2]):
        failures.append("checkpoint-average")
    # PCA vs brute-force eigen-solve
    from explorler.viz import pca_project

    for seed in range(5):
        pts = np.random.default_rng(seed).normal(size=(10, 3)) * [3.0, 1.5, 0.4]
        basis, _ = pca_project(pts)
        evals = np.linalg.eigvalsh(np.cov(pts.T))[::-1][:2]
        if np.abs(basis.explained_variance - evals).max() > 1e-8:
            failures.append("pca")
    return failures


def test_criterion_5_numerical_oracles(capsys):
    t0 = time.perf_counter()
    failures = _numerical_oracles()
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    report(capsys, 5, ok, f"oracle suite {'all passed' if not failures else failures} in {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_6_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["train", "--method", "explorler", "--seed", "7", "--out", str(out)]) == 0
        outs.append((out / "curve.csv").read_bytes())
    ok = outs[0] == outs[1]
    report(capsys, 6, ok, f"two `train --method explorler --seed 7` curves bit-identical: {ok} "
                          f"({len(outs[0])} bytes)")
    assert ok


def test_criterion_7_step_accounting(capsys):
    cfg = config_from_dict({})
    exact = True
    n_events = episodes = 0
    for s in SEEDS:
        res = cached_run("pendulum", "explorler", s)
        by_event = {}
        for r in res.reports:
            by_event.setdefault(r.provenance["iteration"], []).append(r)
        for ev in res.events:
            reps = by_event[ev.iteration]
            lengths = [l for r in reps for l in r.lengths]
            exact &= ev.extra_env_steps == sum(lengths)
            exact &= ev.extra_env_steps == ev.num_candidates * cfg.pipeline.eval_episodes * 200
            exact &= len(lengths) == ev.num_candidates * cfg.pipeline.eval_episodes
            n_events += 1
            episodes += ev.eval_episodes
        train = sum(it["steps"] for it in res.iterations)
        exact &= res.state.env_steps == train + sum(e.extra_env_steps for e in res.events)
        exact &= train == cfg.pipeline.total_iterations * cfg.ppo.steps_per_rollout
    per_iter = episodes / (n_events * cfg.pipeline.esa_trigger_interval)
    overall = episodes / (len(SEEDS) * cfg.pipeline.total_iterations)
    ok = exact and per_iter == 6.0
    report(capsys, 7, ok, f"extra steps = candidates x episodes x horizon on all {n_events} events: {exact}; "
                          f"extra episodes per iteration {per_iter:.2f} within event windows "
                          f"({overall:.2f} over the full {cfg.pipeline.total_iterations}-iteration run)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
