"""Deterministic random-number plumbing.

Every stochastic stage of a run draws from its own named substream of one
root seed, so changing e.g. the bootstrap draw count never perturbs the
noise injected by the simulator.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "spawn_seeds"]


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a Generator for the substream ``name`` of root ``seed``.

    The same (seed, name) pair always yields an identical stream; distinct
    names yield statistically independent streams.
    """
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag]))


def spawn_seeds(seed: int, name: str, n: int) -> list[int]:
    """Derive ``n`` child seeds from a named substream (one per worker/tree)."""
    gen = substream(seed, name)
    return [int(s) for s in gen.integers(0, 2**31 - 1, size=n)]
