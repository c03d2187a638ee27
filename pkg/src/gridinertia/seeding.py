"""Deterministic RNG stream derivation.

A single user-facing seed drives every stochastic stage.  Each stage owns
a fixed stream id, and per-item keys (sample index, channel ids, epoch
number) extend the entropy tuple, so

* the same seed always reproduces the same end-to-end run, and
* changing one stage's draws (e.g. adding noise) never shifts the draws
  seen by another stage.

Streams are derived with ``numpy.random.SeedSequence``, which guarantees
independence between distinct entropy tuples.
"""

import numpy as np

# Fixed stream ids; never renumber, or stored datasets stop reproducing.
STREAM_PROBING = 1
STREAM_NOISE = 2
STREAM_SPLIT = 3
STREAM_INIT = 4
STREAM_BATCH = 5


def derive_rng(seed, stream, *key):
    """Return a Generator for (seed, stream, *key).

    `key` entries must be non-negative integers (sample index, bus id,
    feature index, epoch, ...).
    """
    entropy = (int(seed), int(stream)) + tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy))
