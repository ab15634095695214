"""Counter-based uniform streams keyed by ``(seed, stream_index)``.

Every draw is a pure function of ``(seed, stream_index, counter)``, so a
replication can be regenerated on its own, and batches evaluated in any
chunking or thread layout produce identical numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_keys(seed: int, stream_index) -> np.ndarray:
    """Per-stream 64-bit keys for an array of stream indices."""
    seed_arr = np.array([seed & _MASK], dtype=np.uint64)
    idx = np.asarray(stream_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = _mix64(seed_arr + _GOLDEN)
        return _mix64(k ^ _mix64(idx * _STREAM_SALT + _GOLDEN))


def uniforms_at(keys: np.ndarray, counters) -> np.ndarray:
    """Uniform(0, 1) variates, open interval, for ``(key, counter)`` pairs.

    ``keys`` and ``counters`` broadcast against each other.
    """
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64(keys + (c + np.uint64(1)) * _GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


@dataclass
class RandomStream:
    """A reproducible stream of uniforms.

    Distinct ``(seed, stream_index)`` pairs give independent sequences;
    identical pairs give identical sequences. ``position`` is the next
    counter to be consumed.
    """

    seed: int
    stream_index: int = 0
    position: int = 0
    _key: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0 <= self.seed <= _MASK and 0 <= self.stream_index <= _MASK):
            raise ValueError("seed and stream_index must be unsigned 64-bit integers")
        self._key = stream_keys(self.seed, [self.stream_index])

    def uniforms(self, k: int) -> np.ndarray:
        out = uniforms_at(self._key, np.arange(self.position, self.position + k))
        self.position += k
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])
