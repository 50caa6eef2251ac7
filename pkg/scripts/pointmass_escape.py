#!/usr/bin/env python3
"""Final-window return of PPO and ExploRLer on the two-attractor PointMass task."""
import argparse

from explorler.cli import curve_stats
from explorler.config import parse_config
from explorler.pipeline import run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seeds", default="0,1,2,3")
    args = ap.parse_args()

    cfg = parse_config(args.config, env="pointmass")
    seeds = [int(s) for s in args.seeds.split(",")]
    wins = 0
    for seed in seeds:
        ppo = run_pipeline(cfg, seed, "none")
        exp = run_pipeline(cfg, seed, "explorler")
        f_ppo = curve_stats(ppo.curve.train_returns(), cfg.smoothing_window)[1]
        f_exp = curve_stats(exp.curve.train_returns(), cfg.smoothing_window)[1]
        swaps = sum(e.swapped for e in exp.events)
        wins += f_exp > f_ppo
        print(f"seed {seed}: PPO {f_ppo:7.2f}  ExploRLer {f_exp:7.2f}  ({swaps}/{len(exp.events)} events swapped)")
    print(f"ExploRLer ahead on {wins}/{len(seeds)} seeds")


if __name__ == "__main__":
    main()
