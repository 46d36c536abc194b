"""Counter-based random streams keyed by (master seed, replica, stage tag)."""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stage_key", "stream"]


def stage_key(tag: str) -> int:
    """Stable 64-bit key of a stage name (independent of ``PYTHONHASHSEED``)."""
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


def stream(master_seed: int, replica: int, tag: str) -> np.random.Generator:
    """Philox generator for one stage of one replica.

    Adding a new stage never shifts the draws of existing ones, because
    every stage is seeded on its own.
    """
    if master_seed < 0 or replica < 0:
        raise ValueError("seed and replica must be non-negative")
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), master_seed >> 64, int(replica), stage_key(tag)])
    return np.random.Generator(np.random.Philox(ss))
