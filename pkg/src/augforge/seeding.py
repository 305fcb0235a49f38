"""Deterministic seed derivation.

All randomness in the engine flows through 64-bit seeds derived here, so
results are a pure function of (config, dataset, global seed) and never of
scheduling or worker count.
"""

from __future__ import annotations

import struct

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of *data*."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(
    global_seed: int,
    episode_id: str,
    aug_index: int,
    frame_index: int,
    component_tag: str,
) -> int:
    """Derive a per-item 64-bit seed.

    The payload is the canonical byte serialization: global_seed as 8 bytes
    little-endian, episode id UTF-8, a 0x00 separator, aug_index and
    frame_index as 8 bytes little-endian each, then the component tag UTF-8.
    """
    payload = (
        struct.pack("<Q", global_seed & _MASK64)
        + episode_id.encode("utf-8")
        + b"\x00"
        + struct.pack("<Q", aug_index & _MASK64)
        + struct.pack("<Q", frame_index & _MASK64)
        + component_tag.encode("utf-8")
    )
    return fnv1a64(payload)


def split_seed(seed: int, tag: str) -> int:
    """Derive an independent sub-seed from *seed* for stage *tag*."""
    return fnv1a64(struct.pack("<Q", seed & _MASK64) + tag.encode("utf-8"))


def unit_float(seed: int) -> float:
    """Map a 64-bit seed onto [0, 1)."""
    return (seed & _MASK64) / 2.0**64


def seeded_index(seed: int, n: int) -> int:
    """Pick an index in range(n) from a seed (uniform up to the 2^-64 mod bias)."""
    if n <= 0:
        raise ValueError("cannot pick from an empty sequence")
    return (seed & _MASK64) % n


def rng(seed: int) -> np.random.Generator:
    """A PCG64 generator for operations that need a stream of draws."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))
