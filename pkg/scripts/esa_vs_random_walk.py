#!/usr/bin/env python3
"""ESA against a random walk with the same candidate budget, on shared anchors.

For each seed a plain PPO run supplies the anchor windows; both generators
propose candidates from each window and the best mean over one shared seed
set is recorded per event.
"""
import argparse

from explorler.config import parse_config
from explorler.experiments import compare_esa_random_walk


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--env", default="pointmass")
    ap.add_argument("--seeds", default="0,1,2,3")
    args = ap.parse_args()

    cfg = parse_config(args.config, env=args.env)
    wins = 0
    seeds = [int(s) for s in args.seeds.split(",")]
    for seed in seeds:
        comp = compare_esa_random_walk(cfg, seed)
        esa, rw = comp.mean_best("explorler"), comp.mean_best("random_walk")
        wins += esa >= rw
        print(f"seed {seed}: ESA {esa:8.2f}  random walk {rw:8.2f}  "
              f"({comp.candidates_per_event['explorler'][0]} candidates/event each)")
    print(f"ESA >= random walk on {wins}/{len(seeds)} seeds")


if __name__ == "__main__":
    main()
