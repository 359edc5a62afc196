"""Counter-based random streams.

Every draw is a pure function of ``(seed, counter, tag)``: a splitmix64
finalizer applied to a mixed key. There is no hidden generator state, so any
packet's draws can be recomputed in isolation and different tags never share
a sequence.
"""
from __future__ import annotations

import zlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("ascii"))


def hash64(seed: int, counters, tag: str) -> np.ndarray:
    """uint64 hashes of ``counters`` under ``(seed, tag)``."""
    key = _mix(np.array([(seed & _MASK64)], dtype=np.uint64))[0]
    key = _mix(np.array([key ^ np.uint64(tag_id(tag))], dtype=np.uint64))[0]
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(c * _GOLDEN + key)


def uniform(seed: int, counters, tag: str) -> np.ndarray:
    """Uniform floats in [0, 1) with 53-bit resolution."""
    return (hash64(seed, counters, tag) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def integers(seed: int, counters, tag: str, high: int) -> np.ndarray:
    """Integers uniform on ``{0, ..., high - 1}`` (Lemire multiply-shift)."""
    if high <= 0:
        raise ValueError("high must be positive")
    h = hash64(seed, counters, tag) >> np.uint64(32)
    return ((h * np.uint64(high)) >> np.uint64(32)).astype(np.int64)


def derive_seed(seed: int, *parts: int | str) -> int:
    """Child seed for a named sub-run (episode, sweep cell, ...)."""
    s = seed & _MASK64
    for part in parts:
        tag = part if isinstance(part, str) else f"#{int(part)}"
        s = int(hash64(s, [0], tag)[0])
    return s


def generator(seed: int, *parts: int | str) -> np.random.Generator:
    """numpy Generator on a Philox stream keyed by a derived seed."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *parts)))
