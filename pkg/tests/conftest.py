"""Shared fixtures; long training runs are cached for the whole session."""
import functools
import json

from explorler.config import config_from_dict
from explorler.pipeline import run_pipeline


@functools.lru_cache(maxsize=None)
def _cached(env, method, seed, overrides_json):
    cfg = config_from_dict(json.loads(overrides_json), env=env, method=method)
    return run_pipeline(cfg, seed)


def cached_run(env, method, seed, **overrides):
    """Run (or reuse) one seeded pipeline; ``overrides`` is a nested config dict."""
    return _cached(env, method, seed, json.dumps(overrides, sort_keys=True))
