"""Named random substreams derived from one master seed.

Each name hashes to a fixed spawn key, so adding a consumer of a new stream
never shifts the numbers drawn by existing ones.
"""
from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("env", "policy_init", "sampling", "esa", "eval", "baseline")


def stream_seed(master_seed, name, *extra):
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def stream(master_seed, name, *extra):
    return np.random.Generator(np.random.PCG64(stream_seed(master_seed, name, *extra)))


class Streams:
    """Lazily created, cached generators keyed by stream name."""

    def __init__(self, master_seed):
        self.master_seed = int(master_seed)
        self._cache = {}

    def __getitem__(self, name):
        if name not in self._cache:
            self._cache[name] = stream(self.master_seed, name)
        return self._cache[name]

    def int_seed(self, name):
        """A fresh 32-bit integer seed drawn from ``name`` (for env resets)."""
        return int(self[name].integers(0, 2**31 - 1))
