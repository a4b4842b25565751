"""Counter-based random streams keyed by (seed, key...)."""

from __future__ import annotations

import numpy as np

GENERATOR_ID = "philox4x64"


def make_rng(seed: int, *key: int, generator_id: str = GENERATOR_ID) -> np.random.Generator:
    """Return an independent Philox stream for ``seed`` and the spawn key ``key``.

    Streams for distinct keys are statistically independent, and the stream for a
    given key does not depend on how many other keys are used. That is what makes
    block-parallel Monte Carlo reproducible at any thread count.
    """
    if generator_id != GENERATOR_ID:
        raise ValueError(f"unknown generator_id {generator_id!r}; only {GENERATOR_ID!r} is supported")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
