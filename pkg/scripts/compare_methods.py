#!/usr/bin/env python3
"""Multi-seed comparison of PPO, ExploRLer and the iteration-level baselines.

Writes one suite directory per method and prints a summary table of the
max-smoothed and final-window returns (mean +/- sample std over seeds).
"""
import argparse
from pathlib import Path

from explorler.cli import mean_std, run_suite
from explorler.config import METHODS, parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--env", default="pendulum")
    ap.add_argument("--methods", default="none,explorler", help=f"comma-separated subset of {METHODS}")
    ap.add_argument("--seeds", default="0,1,2,3")
    ap.add_argument("--iterations", type=int)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    print(f"{'method':<15} {'max smoothed':>20} {'final window':>20}")
    for method in args.methods.split(","):
        cfg = parse_config(args.config, env=args.env, method=method)
        if args.iterations is not None:
            cfg.pipeline.total_iterations = args.iterations
        rows, ok = run_suite(cfg, seeds, out_dir=Path(args.out) / args.env / method)
        good = [r for r in rows if r["status"] == "ok"]
        m, s = mean_std([r["max_smoothed_return"] for r in good])
        fm, fs = mean_std([r["final_window_return"] for r in good])
        flag = "" if ok else f"  ({len(rows) - len(good)} seed(s) failed)"
        print(f"{method:<15} {m:>11.2f} +/- {s:<6.2f} {fm:>11.2f} +/- {fs:<6.2f}{flag}")


if __name__ == "__main__":
    main()
