"""Keyed, counter-style randomness.

Two flavours are used in the toolchain:

* ``keyed_uniform``: a stateless splitmix64-style mix of integer keys into a
  uniform double. The engine draws one value per (seed, stream, vehicle, step)
  so results never depend on scheduling or worker count.
* ``pair_generator``: a numpy Philox generator keyed by (seed, zone-pair
  index) so demand sampling is independent of the order zone pairs are
  visited in.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# engine stream labels
STREAM_MOBIL = 1


def _mix(z: int) -> int:
    # splitmix64 finalizer (Steele/Lea/Flood constants)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def keyed_u64(*keys: int) -> int:
    """Deterministically fold integer keys into one 64-bit value."""
    h = 0
    for k in keys:
        h = _mix((h + _GOLDEN + (k & _MASK)) & _MASK)
    return h


def keyed_uniform(*keys: int) -> float:
    """Uniform draw in [0, 1) that is a pure function of the keys."""
    return (keyed_u64(*keys) >> 11) * 2.0 ** -53


def pair_generator(seed: int, pair_index: int) -> np.random.Generator:
    """Counter-based generator for one zone pair's trip sampling stream."""
    key = np.array([seed & _MASK, pair_index & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
