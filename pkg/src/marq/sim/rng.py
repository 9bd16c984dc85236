"""SplitMix64 random streams, one independent stream per replication.

The generator is deliberately tiny and fully documented so the numba kernels
and the pure-numpy fallback can reproduce bit-identical draws: a stream's
state advances by the golden-ratio increment and the output is the standard
SplitMix64 scramble mapped to [0, 1) on 53 bits.  Stream r is seeded by
scrambling ``seed XOR mix64((r+1) * SALT)``, which decorrelates streams from
each other and from the raw seed.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
SALT = np.uint64(0xD2B74407B1CE6E93)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_states(seed: int, n: int) -> np.ndarray:
    """Initial states of n replication streams."""
    reps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ mix64(reps * SALT))


class Streams:
    """Vectorized per-replication streams with optional masked advancement."""

    def __init__(self, seed: int, n: int):
        self.state = stream_states(seed, n)

    def uniform(self, mask=None) -> np.ndarray:
        """Draw one uniform per lane; lanes outside ``mask`` do not advance."""
        with np.errstate(over="ignore"):
            if mask is None:
                self.state = self.state + GAMMA
                z = mix64(self.state)
                return (z >> np.uint64(11)).astype(np.float64) * _INV53
            out = np.zeros(self.state.shape[0])
            adv = self.state[mask] + GAMMA
            self.state[mask] = adv
            out[mask] = (mix64(adv) >> np.uint64(11)).astype(np.float64) * _INV53
            return out
