"""Seedable, splittable randomness shared by samplers and experiments.

Every public operation takes a 64-bit seed; per-trial streams are derived
from (seed, trial_index) so experiment workers never share state.
Bit-exact reproducibility is promised within this implementation only.
"""

from __future__ import annotations

import hashlib

import numpy as np


def rng_from(seed, *path):
    """Generator for a seed plus an arbitrary tuple of stream indices."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def rng_from_bits(bits):
    """Generator seeded from a bit string (numpy 0/1 array or bytes)."""
    arr = np.asarray(bits, dtype=np.uint8)
    digest = hashlib.sha256(np.packbits(arr).tobytes() + str(len(arr)).encode()).digest()
    entropy = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=entropy)))


def random_bits(rng, count):
    """A 0/1 uint8 array of independent fair bits."""
    return rng.integers(0, 2, size=count, dtype=np.uint8)
