"""Deterministic seed derivation for every stochastic component.

All randomness in the package flows from a single master seed plus a short
integer path identifying the consumer, e.g. ``derive_rng(master, rep)`` for
Monte Carlo replicate ``rep``.  The path is folded into a
``numpy.random.SeedSequence`` so that distinct paths yield statistically
independent streams and the same path always reproduces the same stream.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 63) - 1


def seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    """Build the seed sequence for ``master_seed`` and a component path."""
    entropy = [int(master_seed) & _MASK] + [int(p) & _MASK for p in path]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the component identified by ``path``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def derive_seed(master_seed: int, *path: int) -> int:
    """A 32-bit integer seed derived from the master seed and ``path``.

    Handy for libraries that want a plain int (e.g. k-means restarts).
    """
    return int(seed_sequence(master_seed, *path).generate_state(1)[0])
