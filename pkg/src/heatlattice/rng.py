"""Deterministic random streams for simulations.

The package uses the xoshiro256++ generator (Blackman/Vigna), implemented
twice against the same 4-word state layout: here in pure Python, and inside
the compiled kernels (:mod:`heatlattice._kernels`). Both consume the state
identically, so a Python reference step and a compiled run started from equal
states produce the same draws. The Python side is the readable reference;
the kernels are the fast path.

Stream derivation is fixed and version-pinned: a 64-bit seed is expanded to
the 4-word state with ``numpy.random.SeedSequence(entropy=seed,
spawn_key=(stream_index,))``, one stream per replica. Changing this mapping
would silently change every published result, so treat it as frozen.

Draw conventions (shared by Python and kernels):

* ``uniform()`` is ``(next_u64 >> 11) * 2**-53``, in ``[0, 1)``.
* ``randint(n)`` is ``int(uniform() * n)``.
* ``exponential(mean)`` is ``-log(1 - uniform()) * mean``.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1


def canonical_seed(seed: int) -> int:
    """Map any Python integer to the unsigned 64-bit value actually used.

    Seeds are opaque 64-bit quantities; negative inputs are accepted and
    reduced modulo 2**64 (two's complement view).
    """
    return int(seed) & _MASK


def stream_state(seed: int, stream: int = 0) -> np.ndarray:
    """Derive the 4-word xoshiro256++ state for one replica stream."""
    ss = np.random.SeedSequence(entropy=canonical_seed(seed), spawn_key=(stream,))
    state = ss.generate_state(4, np.uint64)
    if not state.any():  # xoshiro must not start from all-zero state
        state[0] = np.uint64(1)
    return state


def replica_states(seed: int, replicas: int) -> np.ndarray:
    """States for replicas 0..replicas-1, shape (replicas, 4), dtype uint64."""
    out = np.empty((replicas, 4), dtype=np.uint64)
    for r in range(replicas):
        out[r] = stream_state(seed, r)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Rng:
    """A single xoshiro256++ stream.

    The state lives in a ``numpy`` uint64 array so a compiled kernel can be
    handed ``rng.state`` directly and continue the very same stream; draws
    made by the kernel advance this object too.
    """

    __slots__ = ("state",)

    def __init__(self, state: np.ndarray):
        state = np.ascontiguousarray(state, dtype=np.uint64)
        if state.shape != (4,):
            raise ValueError("state must be 4 uint64 words")
        if not state.any():
            raise ValueError("all-zero state is invalid for xoshiro256++")
        self.state = state

    @classmethod
    def from_seed(cls, seed: int, stream: int = 0) -> "Rng":
        return cls(stream_state(seed, stream))

    def next_u64(self) -> int:
        s = self.state
        s0, s1, s2, s3 = (int(s[0]), int(s[1]), int(s[2]), int(s[3]))
        result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        s[0] = np.uint64(s0)
        s[1] = np.uint64(s1)
        s[2] = np.uint64(s2)
        s[3] = np.uint64(s3)
        return result

    def uniform(self) -> float:
        """Uniform draw in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, n: int) -> int:
        """Uniform integer in {0, ..., n-1}; n >= 1."""
        return int(self.uniform() * n)

    def exponential(self, mean: float = 1.0) -> float:
        """Exponential draw with the given mean (mean 0 gives 0)."""
        return -math.log(1.0 - self.uniform()) * mean

    def copy(self) -> "Rng":
        return Rng(self.state.copy())
