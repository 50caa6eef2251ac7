"""Iteration-level parameter-space exploration for on-policy RL (PPO + empty-space search)."""
from __future__ import annotations

import hashlib
from pathlib import Path

__version__ = "0.1.0"


def build_id():
    """Short content hash of the package sources, stable for a given build."""
    h = hashlib.sha1()
    root = Path(__file__).parent
    for path in sorted(root.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]
