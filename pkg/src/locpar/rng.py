"""Reproducible random-number plumbing.

All stochastic entry points accept either an integer seed, an
``np.random.SeedSequence`` or a ready ``np.random.Generator``.  Monte Carlo
replications get their own child generator spawned from the master seed, so
evaluating replications in any order (or in parallel) yields identical
results.
"""
from __future__ import annotations

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Return a Generator for ``seed`` (pass-through if already one)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from a master seed."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]
