"""Deterministic random streams.

Every logical unit of work (a trajectory, a Markov chain, a table node)
draws from its own counter-based Philox stream keyed by
``(master_seed, *key)``.  Streams are independent of scheduling order, so
a parallel run reduces to exactly the same numbers as a serial one.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for the work unit identified by ``key``."""
    entropy = (int(master_seed),) + tuple(int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def seed_key(seed) -> tuple[int, ...]:
    """Normalize an int or tuple seed to a tuple usable with ``stream``."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)
