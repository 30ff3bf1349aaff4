"""Deterministic seed derivation.

Every random stream in the package is a pure function of a master seed and a
tuple of keys (experiment kind, process tag, replica index, sweep index, ...).
Keys may be ints or strings; strings are mapped through CRC32 so the mapping
is stable across interpreter runs (unlike ``hash``).
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def key_to_int(key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported seed key type: {type(key).__name__}")


def seed_sequence(master_seed: int, *keys) -> np.random.SeedSequence:
    if master_seed < 0:
        raise ValueError("master_seed must be a non-negative 64-bit integer")
    return np.random.SeedSequence(
        entropy=int(master_seed) & _MASK64,
        spawn_key=tuple(key_to_int(k) for k in keys),
    )


def derive_rng(master_seed: int, *keys) -> np.random.Generator:
    """Independent generator for the stream identified by ``keys``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *keys)))


def derive_seed(master_seed: int, *keys) -> int:
    """A 63-bit child seed, usable as the master seed of a nested stream."""
    state = seed_sequence(master_seed, *keys).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])
