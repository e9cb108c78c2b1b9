"""Deterministic, splittable random streams.

All randomness in the package flows through `derive_rng`. Streams are
derived from an integer master seed plus an integer key path, backed by
a counter-based bit generator, so that work units (paths, blocks) can
be computed in any order with identical results.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, key...).

    The same (seed, key) always yields the same stream; distinct keys
    yield statistically independent streams.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key: int) -> int:
    """Integer seed for the child stream identified by (seed, key...).

    For interfaces that take a plain integer seed rather than a
    generator. Deterministic in (seed, key) and independent of the
    order in which children are drawn.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
