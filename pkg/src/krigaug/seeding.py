"""Seed derivation.

Every random stream descends from one master seed through a path of keys,
e.g. ``derive_seed(master, "repeat", 3, "forest")``. String keys hash with
CRC-32 and integer keys are used as-is; the path becomes the ``spawn_key``
of a :class:`numpy.random.SeedSequence`, so any single stage can be
re-derived without replaying the others.
"""

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("seed path keys must be non-negative")
    return k


def derive_seed(master: int, *path) -> int:
    """A 63-bit seed for the stream named by ``path`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(k) for k in path))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) & ((1 << 63) - 1)


def rng_for(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))
