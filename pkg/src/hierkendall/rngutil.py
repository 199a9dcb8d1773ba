"""Seed handling.

All randomness flows through ``numpy.random.Generator`` objects. A single
64-bit master seed is split into independent substreams with
``SeedSequence(seed, spawn_key=path)``, where ``path`` is a tuple of small
integers naming the consumer (e.g. ``(STREAM_NODE, node_index)`` for the
sampler of one model node, ``(STREAM_REPLICATION, cell, rep)`` for one
simulation-study replication). Streams are therefore reproducible and
independent of execution order or parallel scheduling.
"""

from __future__ import annotations

import numpy as np

# stream namespaces used by the package (documented, stable)
STREAM_NODE = 0          # per-node sampling inside model_sample
STREAM_KENDALL = 1       # Monte Carlo builds of empirical Kendall functions
STREAM_REPLICATION = 2   # simulation-study replications
STREAM_FORECAST = 3      # per-day VaR forecast simulation
STREAM_MISC = 4


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the RNG for substream ``path`` of the given master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def as_rng(rng_or_seed) -> np.random.Generator:
    """Accept a Generator (or a duck-typed stand-in), a seed, or None."""
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    if not isinstance(rng_or_seed, (int, np.integer, type(None))) and (
            hasattr(rng_or_seed, "random") or hasattr(rng_or_seed, "standard_exponential")):
        return rng_or_seed
    return np.random.default_rng(rng_or_seed)
