"""Deterministic derivation of child seeds for nested RNG streams."""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 step: maps a 64-bit state to a well-mixed 64-bit output."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, *indices: int) -> int:
    """Derive a child seed from a root seed and an index path.

    Independent of execution order, so per-tree / per-replicate streams stay
    identical under any parallel schedule.
    """
    state = splitmix64(seed & _MASK64)
    for idx in indices:
        state = splitmix64(state ^ splitmix64(idx & _MASK64))
    return state


def rng_for(seed: int, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *indices))
