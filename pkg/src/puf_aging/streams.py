"""Counter-based random streams.

Every draw is a pure function of ``(key, index)``, so any subset of cells can
be evaluated in any order, on any number of threads, and still reproduce the
values a full sequential pass would produce. The generator is SplitMix64
addressed by counter rather than advanced by state.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, tag: str, *sub: int) -> int:
    """Derive a 64-bit stream key from a seed, a purpose tag and sub-counters."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & _MASK64).to_bytes(8, "little"))
    h.update(tag.encode())
    for s in sub:
        h.update((int(s) & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def uint64(key: int, index) -> np.ndarray:
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (idx + np.uint64(1)) * _GAMMA
        return _mix(z)


def uniform(key: int, index) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1)."""
    bits = uint64(key, index) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def normal(key: int, index) -> np.ndarray:
    """Standard normal draws by inverse CDF of :func:`uniform`."""
    return ndtri(uniform(key, index))
