"""Iteration-level exploration wrapped around PPO training.

Every ``esa_trigger_interval`` iterations the last-epoch checkpoints collected
since the previous event (the anchors) are handed to a candidate generator;
all candidates are scored on one shared seed set and the best one becomes the
policy that training resumes from.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import make_generator
from .envs import make_env
from .evaluator import Evaluator, rank_candidates
from .nn import FlatParams, save_flat
from .ppo import ActorCritic, TrainerState, train_iteration
from .rollout import EnvRunner
from .seeding import Streams

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("env_steps_cumulative", "iteration", "episode_return", "event_type")
ITERATION_COLUMNS = ("iteration", "env_steps", "mean_episode_return", "policy_loss", "value_loss", "entropy")


@dataclass
class CurveRow:
    env_steps: int
    iteration: int
    episode_return: float
    event_type: str


@dataclass
class TrainingCurve:
    rows: list = field(default_factory=list)

    def append(self, env_steps, iteration, episode_return, event_type):
        if self.rows and env_steps <= self.rows[-1].env_steps:
            raise ValueError("curve env_steps must be strictly increasing")
        self.rows.append(CurveRow(int(env_steps), int(iteration), float(episode_return), event_type))

    def train_returns(self):
        return np.array([r.episode_return for r in self.rows if r.event_type == "train"])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CURVE_COLUMNS)
            for r in self.rows:
                w.writerow([r.env_steps, r.iteration, repr(r.episode_return), r.event_type])

    @classmethod
    def from_csv(cls, path):
        curve = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                curve.rows.append(CurveRow(int(row["env_steps_cumulative"]), int(row["iteration"]),
                                           float(row["episode_return"]), row["event_type"]))
        return curve


@dataclass
class EventLog:
    iteration: int
    num_anchors: int
    num_candidates: int
    eval_episodes: int
    extra_env_steps: int
    episode_length_sum: int
    best_id: int
    best_mean: float
    incumbent_mean: float | None
    swapped: bool
    seed_set: list


@dataclass
class RunResult:
    curve: TrainingCurve
    iterations: list
    events: list
    reports: list
    state: TrainerState
    final_policy: FlatParams
    # last-epoch checkpoint of every training iteration, in order
    anchors: list = field(default_factory=list)
    last_record: object = None

    @property
    def train_env_steps(self):
        return sum(it["steps"] for it in self.iterations)

    @property
    def extra_env_steps(self):
        return sum(e.extra_env_steps for e in self.events)


@dataclass
class EventContext:
    """What a candidate generator may look at during one exploration event."""

    cfg: object
    anchors: list
    record: object
    state: TrainerState
    evaluator: Evaluator
    rng: np.random.Generator

    def evaluate_vector(self, values):
        flat = FlatParams(values, self.state.ac.policy_layout)
        return self.evaluator.evaluate(flat).mean_return


def make_trainer(cfg, seed):
    streams = Streams(seed)
    env = make_env(cfg.env, streams.int_seed("env"))
    ac = ActorCritic.create(env, streams["policy_init"], init_log_std=cfg.ppo.init_log_std)
    state = TrainerState(ac, EnvRunner(env), streams["sampling"])
    return state, streams


def run_pipeline(cfg, seed, method=None, out_dir=None):
    """Train with the configured (or given) method; returns a :class:`RunResult`."""
    method = cfg.method if method is None else method
    generator = make_generator(method)
    state, streams = make_trainer(cfg, seed)
    pcfg = cfg.pipeline
    evaluator = Evaluator(cfg.env, pcfg.eval_episodes, streams["eval"], pcfg.eval_action_mode)
    gen_rng = streams["esa" if method == "explorler" else "baseline"]
    curve = TrainingCurve()
    iterations, events, reports = [], [], []

    def log_iteration(record, start_steps, phase):
        for ret, end in zip(record.episode_returns, record.episode_ends):
            curve.append(end, record.iteration, ret, "train")
        iterations.append({
            "iteration": record.iteration, "env_steps": state.env_steps, "phase": phase,
            "steps": state.env_steps - start_steps,
            "mean_episode_return": record.mean_episode_return, "policy_loss": record.policy_loss,
            "value_loss": record.value_loss, "entropy": record.entropy,
        })

    pretrain_iters = math.ceil(pcfg.pretrain_steps / cfg.ppo.steps_per_rollout)
    for _ in range(pretrain_iters):
        start = state.env_steps
        log_iteration(train_iteration(state, cfg.ppo), start, "pretrain")

    anchors, all_anchors, record = [], [], None
    for i in range(1, pcfg.total_iterations + 1):
        start = state.env_steps
        record = train_iteration(state, cfg.ppo)
        log_iteration(record, start, "train")
        anchors.append(record.anchor)
        all_anchors.append(record.anchor)
        if generator is None or i % pcfg.esa_trigger_interval != 0:
            continue
        ctx = EventContext(cfg, anchors, record, state, evaluator, gen_rng)
        try:
            event, event_reports = _exploration_event(ctx, generator, i)
        except Exception as exc:
            if out_dir is not None:
                save_flat(state.ac.full_flat(), Path(out_dir) / f"crash_iter{i}.flat")
            raise RuntimeError(f"exploration event at iteration {i} failed: {exc}") from exc
        events.append(event)
        reports.extend(event_reports)
        curve.append(state.env_steps, i, event.best_mean, "esa_swap" if event.swapped else "esa_noswap")
        anchors = []
        log.debug("iter %d: event best %.2f swapped=%s", i, event.best_mean, event.swapped)

    return RunResult(curve, iterations, events, reports, state, state.ac.policy_flat(), all_anchors, record)


def _exploration_event(ctx, generator, iteration):
    state, evaluator, pcfg = ctx.state, ctx.evaluator, ctx.cfg.pipeline
    seed_set = evaluator.new_event()
    steps_before, episodes_before = evaluator.steps_used, evaluator.episodes_used
    candidates = generator.propose(ctx)
    layout = state.ac.policy_layout
    pool = [(FlatParams(c.position, layout), {"particle": c.particle, "release": c.release, "iteration": iteration})
            for c in candidates]
    num_candidates = len(pool)
    incumbent_id = None
    if pcfg.include_incumbent:
        incumbent_id = len(pool)
        pool.append((state.ac.policy_flat(), {"incumbent": True, "iteration": iteration}))

    reports = [evaluator.evaluate(flat, cid, prov) for cid, (flat, prov) in enumerate(pool)]
    best = rank_candidates(reports)
    swapped = best != incumbent_id
    if swapped:
        state.ac.load_policy(pool[best][0])
        state.adam.reset()

    extra_steps = evaluator.steps_used - steps_before
    state.env_steps += extra_steps
    event = EventLog(
        iteration=iteration,
        num_anchors=len(ctx.anchors),
        num_candidates=num_candidates,
        eval_episodes=evaluator.episodes_used - episodes_before,
        extra_env_steps=extra_steps,
        episode_length_sum=sum(sum(r.lengths) for r in reports),
        best_id=best,
        best_mean=reports[best].mean_return,
        incumbent_mean=None if incumbent_id is None else reports[incumbent_id].mean_return,
        swapped=swapped,
        seed_set=list(seed_set),
    )
    return event, reports


def run_explorler(cfg, seed, out_dir=None):
    return run_pipeline(cfg, seed, "explorler", out_dir)


def run_baseline_pipeline(cfg, baseline_id, seed, out_dir=None):
    if baseline_id not in ("checkpoint_avg", "random_walk", "pbt", "guided_es", "vfs", "none"):
        raise ValueError(f"unknown baseline {baseline_id!r}")
    return run_pipeline(cfg, seed, baseline_id, out_dir)


def write_run(result, cfg, seed, out_dir, wall_time=None, method=None, save_anchors=False):
    """Curve CSV, iteration log, evaluation reports (JSON lines), events, manifest.

    With ``save_anchors`` every iteration's last-epoch checkpoint is written
    to ``anchors/iter_NNNN.flat`` (input for the ``explore`` subcommand).
    """
    from . import build_id

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.curve.to_csv(out / "curve.csv")
    with open(out / "iterations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ITERATION_COLUMNS)
        for it in result.iterations:
            w.writerow([it["iteration"], it["env_steps"], repr(it["mean_episode_return"]),
                        repr(it["policy_loss"]), repr(it["value_loss"]), repr(it["entropy"])])
    with open(out / "eval_reports.jsonl", "w") as fh:
        for r in result.reports:
            fh.write(r.to_json() + "\n")
    with open(out / "events.jsonl", "w") as fh:
        for e in result.events:
            fh.write(json.dumps(asdict(e)) + "\n")
    save_flat(result.final_policy, out / "final_policy.flat")
    if save_anchors:
        (out / "anchors").mkdir(exist_ok=True)
        for ck in result.anchors:
            save_flat(ck.params, out / "anchors" / f"iter_{ck.iteration:04d}.flat")
    manifest = {
        "config": cfg.to_dict(),
        "seed": int(seed),
        "method": method or cfg.method,
        "build_id": build_id(),
        "wall_time_s": wall_time,
        "train_env_steps": result.train_env_steps,
        "extra_env_steps": result.extra_env_steps,
        "total_env_steps": int(result.state.env_steps),
        "num_events": len(result.events),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def timed_run(cfg, seed, method=None, out_dir=None):
    t0 = time.perf_counter()
    result = run_pipeline(cfg, seed, method, out_dir)
    return result, time.perf_counter() - t0
