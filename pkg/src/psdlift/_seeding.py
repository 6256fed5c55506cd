"""Deterministic seed derivation for per-trial RNG streams.

A master 64-bit seed is mixed with integer indices (dimension index,
rank index, measurement-count index, trial number, ...) through a
splitmix64 chain.  The derivation is pure integer arithmetic, so ports
in other languages can reproduce the trial partitioning even if their
generator streams differ.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output step for a 64-bit state."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Fold ``indices`` into ``master``, returning a new 64-bit seed.

    Each index advances the state by ``splitmix64(state ^ (index + 1))``
    so that distinct index tuples land in distinct streams.
    """
    state = master & _MASK
    for ix in indices:
        state = splitmix64(state ^ ((int(ix) + 1) & _MASK))
    return state


def rng_for(master: int, *indices: int) -> np.random.Generator:
    """A ``numpy`` generator seeded from ``derive_seed(master, *indices)``."""
    return np.random.default_rng(derive_seed(master, *indices))
