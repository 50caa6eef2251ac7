"""Controlled comparisons that share one training trajectory between generators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import random_walk_candidates
from .esa import run_esa
from .evaluator import Evaluator, rank_candidates
from .nn import FlatParams
from .pipeline import run_pipeline
from .seeding import Streams


@dataclass
class GeneratorComparison:
    seed: int
    # best candidate mean return per event, keyed by generator name
    best: dict
    candidates_per_event: dict

    def mean_best(self, name):
        return float(np.mean(self.best[name]))


def compare_esa_random_walk(cfg, seed, run=None):
    """Score ESA and the random walk on identical anchor windows and seed sets.

    Anchors come from a plain PPO run (no swaps), so both generators see
    exactly the same checkpoints; at every would-be event each proposes its
    candidates and the best mean over a shared seed set is recorded.
    """
    run = run_pipeline(cfg, seed, "none") if run is None else run
    streams = Streams(seed)
    evaluator = Evaluator(cfg.env, cfg.pipeline.eval_episodes, streams["eval"], cfg.pipeline.eval_action_mode)
    esa_rng, rw_rng = streams["esa"], streams["baseline"]
    layout = run.final_policy.layout
    interval = cfg.pipeline.esa_trigger_interval
    m = cfg.num_agents()
    best = {"explorler": [], "random_walk": []}
    counts = {"explorler": [], "random_walk": []}
    for end in range(interval, len(run.anchors) + 1, interval):
        window = run.anchors[end - interval:end]
        anchors = np.stack([c.params.values for c in window])
        proposals = {
            "explorler": run_esa(anchors, cfg.esa, esa_rng, m),
            "random_walk": random_walk_candidates(window[-1].params, cfg.esa, rw_rng, m),
        }
        evaluator.new_event()
        for name, cands in proposals.items():
            reports = [evaluator.evaluate(FlatParams(c.position, layout), cid) for cid, c in enumerate(cands)]
            best[name].append(reports[rank_candidates(reports)].mean_return)
            counts[name].append(len(cands))
    return GeneratorComparison(seed, best, counts)
