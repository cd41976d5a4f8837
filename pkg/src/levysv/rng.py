"""Seedable, splittable random streams.

Every trial gets its own Philox (counter-based) stream derived from
``(seed, trial_index)``, so results do not depend on scheduling order.
"""

import numpy as np

__all__ = ["make_rng", "trial_rng", "split"]


def make_rng(seed):
    """Return a Philox-backed Generator for a 64-bit integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def trial_rng(seed, trial_index):
    """Independent stream for trial ``trial_index`` of a run seeded by ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.Philox(ss))


def split(rng, n):
    """Split a generator into ``n`` independent child generators."""
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(n)]
