"""Command-line harness: single runs, multi-seed suites, standalone ESA, plots."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import METHODS, ConfigError, parse_config
from .esa import run_esa
from .evaluator import Evaluator, evaluate_policy
from .nn import load_flat, save_flat
from .pipeline import TrainingCurve, make_trainer, run_pipeline, write_run
from .ppo import train_iteration
from .seeding import Streams

log = logging.getLogger("explorler")

WORKERS_ENV = "EXPLORLER_WORKERS"
SUMMARY_COLUMNS = ("seed", "status", "max_smoothed_return", "final_window_return", "env_steps")


def smooth(values, window):
    """Trailing moving average; the first ``window - 1`` entries average the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def curve_stats(returns, window):
    """``(max of smoothed curve, mean of the last window)`` over training episode returns."""
    returns = np.asarray(returns, dtype=np.float64)
    if returns.size == 0:
        return float("nan"), float("nan")
    return float(smooth(returns, window).max()), float(returns[-window:].mean())


def mean_std(values):
    """Mean and sample std; one value has std 0."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def num_workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected an integer, got {raw!r}") from None
    return max(n, 1)


# -- suite -----------------------------------------------------------------------

def _suite_job(cfg, method, seed, out_dir):
    t0 = time.perf_counter()
    result = run_pipeline(cfg, seed, method, out_dir)
    write_run(result, cfg, seed, out_dir, time.perf_counter() - t0, method)
    best, final = curve_stats(result.curve.train_returns(), cfg.smoothing_window)
    return best, final, int(result.state.env_steps)


def run_suite(cfg, seeds=None, method=None, out_dir=None, workers=None):
    """Run every seed, write per-seed outputs and ``summary.csv``.

    Returns ``(rows, ok)``; a failed seed is recorded and the rest still run.
    """
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    method = method or cfg.method
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = num_workers() if workers is None else workers
    jobs = [(cfg, method, s, out / f"seed_{s}") for s in seeds]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = {s: pool.submit(_suite_job, *job) for s, job in zip(seeds, jobs)}
            for s, fut in futures.items():
                try:
                    results[s] = fut.result()
                except Exception as exc:  # noqa: BLE001 - record and continue
                    results[s] = exc
    else:
        for s, job in zip(seeds, jobs):
            try:
                results[s] = _suite_job(*job)
            except Exception as exc:  # noqa: BLE001
                results[s] = exc

    rows = []
    for s in seeds:
        res = results[s]
        if isinstance(res, Exception):
            log.error("seed %s failed: %s", s, res)
            rows.append({"seed": s, "status": f"failed: {res}", "max_smoothed_return": float("nan"),
                         "final_window_return": float("nan"), "env_steps": 0})
        else:
            rows.append({"seed": s, "status": "ok", "max_smoothed_return": res[0],
                         "final_window_return": res[1], "env_steps": res[2]})
    write_summary(rows, out / "summary.csv")
    return rows, all(r["status"] == "ok" for r in rows)


def write_summary(rows, path):
    ok = [r for r in rows if r["status"] == "ok"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["seed"], r["status"], repr(r["max_smoothed_return"]),
                        repr(r["final_window_return"]), r["env_steps"]])
        for label, key in (("max_smoothed_return", "max_smoothed_return"),
                           ("final_window_return", "final_window_return")):
            m, s = mean_std([r[key] for r in ok])
            w.writerow([f"{label}_mean", len(ok), repr(m), "", ""])
            w.writerow([f"{label}_std", len(ok), repr(s), "", ""])


# -- plotting --------------------------------------------------------------------

def curves_band(curves, window, points=200):
    """Smoothed train curves resampled on a shared env-step grid: ``(x, mean, std)``."""
    series = []
    for c in curves:
        rows = [r for r in c.rows if r.event_type == "train"]
        if rows:
            series.append((np.array([r.env_steps for r in rows], float),
                           smooth([r.episode_return for r in rows], window)))
    if not series:
        raise ValueError("no training rows to plot")
    lo = max(s[0][0] for s in series)
    hi = min(s[0][-1] for s in series)
    if hi <= lo:
        hi = lo + 1.0
    x = np.linspace(lo, hi, points)
    ys = np.stack([np.interp(x, sx, sy) for sx, sy in series])
    std = ys.std(axis=0, ddof=1) if len(ys) > 1 else np.zeros(points)
    return x, ys.mean(axis=0), std


def plot_svg(x, mean, std, title="", width=640, height=400):
    pad = 50
    lo = float(np.min(mean - std))
    hi = float(np.max(mean + std))
    if hi == lo:
        hi = lo + 1.0
    x0, x1 = float(x[0]), float(x[-1]) if x[-1] > x[0] else float(x[0]) + 1.0

    def px(a, b):
        return pad + (a - x0) / (x1 - x0) * (width - 2 * pad), height - pad - (b - lo) / (hi - lo) * (height - 2 * pad)

    upper = [px(a, b) for a, b in zip(x, mean + std)]
    lower = [px(a, b) for a, b in zip(x, mean - std)][::-1]
    band = " ".join(f"{a:.1f},{b:.1f}" for a, b in upper + lower)
    line = " ".join(f"{a:.1f},{b:.1f}" for a, b in (px(a, b) for a, b in zip(x, mean)))
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polygon points="{band}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>',
        f'<polyline points="{line}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">env steps '
        f'({x0:.0f} to {x1:.0f})</text>',
        f'<text x="8" y="{pad - 10}" font-size="12">return [{lo:.1f}, {hi:.1f}]</text>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        "</svg>",
    ])


# -- subcommands -----------------------------------------------------------------

def _load_cfg(args, **extra):
    overrides = {"env": getattr(args, "env", None), "method": getattr(args, "method", None),
                 "out": getattr(args, "out", None)}
    overrides.update(extra)
    cfg = parse_config(args.config, **overrides)
    if getattr(args, "iterations", None) is not None:
        cfg.pipeline.total_iterations = args.iterations
        cfg.validate()
    return cfg


def cmd_train(args):
    cfg = _load_cfg(args)
    out = Path(cfg.out)
    t0 = time.perf_counter()
    result = run_pipeline(cfg, args.seed, out_dir=out)
    wall = time.perf_counter() - t0
    write_run(result, cfg, args.seed, out, wall, save_anchors=args.save_anchors)
    best, final = curve_stats(result.curve.train_returns(), cfg.smoothing_window)
    print(f"seed {args.seed} {cfg.method} on {cfg.env}: max smoothed {best:.2f}, final window {final:.2f}, "
          f"{result.state.env_steps} env steps, {len(result.events)} events, {wall:.1f}s -> {out}")
    return 0


def cmd_explore(args):
    cfg = _load_cfg(args)
    paths = []
    for p in args.anchors:
        p = Path(p)
        paths.extend(sorted(p.glob("*.flat")) if p.is_dir() else [p])
    if not paths:
        raise ValueError("no anchor files given")
    anchors = [load_flat(p) for p in paths]
    if len({a.layout for a in anchors}) != 1:
        raise ValueError("anchor files have different layouts")
    streams = Streams(args.seed)
    candidates = run_esa([a.values for a in anchors], cfg.esa, streams["esa"], cfg.num_agents())
    out = Path(cfg.out)
    (out / "candidates").mkdir(parents=True, exist_ok=True)
    evaluator = Evaluator(cfg.env, cfg.pipeline.eval_episodes, streams["eval"],
                          cfg.pipeline.eval_action_mode) if args.evaluate else None
    with open(out / "candidates.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("candidate_id", "particle", "release", "mean_return"))
        for cid, c in enumerate(candidates):
            flat = anchors[0].with_values(c.position)
            save_flat(flat, out / "candidates" / f"cand_{cid:03d}.flat")
            score = evaluator.evaluate(flat, cid, c.provenance).mean_return if evaluator else float("nan")
            w.writerow((cid, c.particle, c.release, repr(score)))
    manifest = {
        "seed": args.seed, "config": cfg.to_dict(),
        "anchors": [str(p) for p in paths],
        "candidates": [dict(c.provenance, candidate_id=cid, file=f"candidates/cand_{cid:03d}.flat")
                       for cid, c in enumerate(candidates)],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"{len(candidates)} candidates from {len(anchors)} anchors -> {out}")
    return 0


def cmd_eval(args):
    flat = load_flat(args.policy)
    seeds = [int(s) for s in np.random.default_rng(args.seed).integers(0, 2**31 - 1, size=args.episodes)]
    report = evaluate_policy(flat, args.env, args.episodes, seeds, args.mode)
    print(report.to_json())
    return 0


def cmd_visualize(args):
    from .viz import landscape, write_landscape

    cfg = _load_cfg(args, method="none")
    state, streams = make_trainer(cfg, args.seed)
    record = None
    for _ in range(max(args.iterations, 1)):
        record = train_iteration(state, cfg.ppo)
    checkpoints = [c.params for c in record.checkpoints]
    seed_set = [int(s) for s in streams["eval"].integers(0, 2**31 - 1, size=args.episodes)]

    def score(flat):
        return evaluate_policy(flat, cfg.env, args.episodes, seed_set, cfg.pipeline.eval_action_mode).mean_return

    result = landscape(checkpoints, score, streams["baseline"], args.count, args.resolution)
    out = write_landscape(result, cfg.out)
    ev = result["basis"].explained_variance
    print(f"{args.count} samples around {len(checkpoints)} checkpoints, explained variance "
          f"{ev[0]:.3g}/{ev[1]:.3g}, returns {result['returns'].min():.1f}..{result['returns'].max():.1f} -> {out}")
    return 0


def cmd_suite(args):
    cfg = _load_cfg(args)
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    rows, ok = run_suite(cfg, seeds, out_dir=cfg.out)
    good = [r for r in rows if r["status"] == "ok"]
    m, s = mean_std([r["max_smoothed_return"] for r in good])
    fm, fs = mean_std([r["final_window_return"] for r in good])
    print(f"{cfg.method} on {cfg.env}, {len(good)}/{len(rows)} seeds ok: max smoothed {m:.2f} +/- {s:.2f}, "
          f"final window {fm:.2f} +/- {fs:.2f} -> {Path(cfg.out) / 'summary.csv'}")
    return 0 if ok else 1


def cmd_plot(args):
    paths = []
    for p in args.curves:
        p = Path(p)
        paths.extend(sorted(p.glob("seed_*/curve.csv")) or sorted(p.glob("*.csv")) if p.is_dir() else [p])
    curves = [TrainingCurve.from_csv(p) for p in paths]
    x, mean, std = curves_band(curves, args.window)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(plot_svg(x, mean, std, args.title or f"{len(curves)} runs"))
    print(f"plotted {len(curves)} curves -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="explorler", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method=True):
        p.add_argument("--config", help="YAML config (or a run manifest.json)")
        p.add_argument("--env", help="environment id (pendulum, pointmass)")
        if method:
            p.add_argument("--method", choices=METHODS)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="one training run")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, help="override pipeline.total_iterations")
    p.add_argument("--save-anchors", action="store_true", help="write every iteration's anchor checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explore", help="standalone ESA over saved anchor checkpoints")
    common(p, method=False)
    p.add_argument("anchors", nargs="+", help=".flat files or directories of them")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--evaluate", action="store_true", help="also score every candidate")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("eval", help="score a saved policy")
    p.add_argument("policy", help="a .flat file")
    p.add_argument("--env", default="pendulum")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("deterministic", "stochastic"), default="deterministic")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="contour map of returns around epoch checkpoints")
    common(p, method=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=10, help="PPO iterations before sampling")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--resolution", type=int, default=40)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("suite", help="multi-seed run with summary table")
    common(p)
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")], help="comma-separated seeds")
    p.add_argument("--iterations", type=int, help="override pipeline.total_iterations")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("plot", help="curve CSVs to an SVG with a +/-1 std band")
    p.add_argument("curves", nargs="+", help="curve.csv files or suite directories")
    p.add_argument("--out", default="curve.svg")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
