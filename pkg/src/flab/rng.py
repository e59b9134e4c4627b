"""Counter-based SplitMix64 stream and Box-Muller normals.

The generator state is a single 64-bit counter advanced by the golden-ratio
increment; each output is the counter passed through the SplitMix64 finalizer.
Because outputs depend only on (seed, position), blocks of draws are produced
with vectorized uint64 arithmetic and stay bit-identical to drawing them one by
one.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_GAMMA = np.uint64(GAMMA)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (used for seed derivation)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


class SplitMix64:
    """Deterministic 64-bit stream; ``SplitMix64(s).u64(n)`` is reproducible everywhere."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * _GAMMA
            out = _mix_array(z)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits."""
        return (self.u64(n) >> _S11).astype(np.float64) * _TWO_M53

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller; both outputs of each pair are used in order."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` by sorting random keys."""
        return np.argsort(self.u64(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, sorted ascending."""
        return np.sort(self.permutation(n)[:k])


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master_seed: int, labels=()) -> int:
    """Mix a master seed with a tuple of int/str labels into a 64-bit seed.

    ``h = mix64(master + GAMMA)``, then for each label
    ``h = mix64(h ^ mix64(value + tag * GAMMA))`` where ints use their two's
    complement value (tag 1) and strings their FNV-1a 64 hash of UTF-8 bytes
    (tag 2). The type tag keeps ``5`` and ``"5"`` apart.
    """
    h = mix64(int(master_seed) + GAMMA)
    for label in labels:
        if isinstance(label, str):
            value, tag = _fnv1a64(label.encode("utf-8")), 2
        else:
            value, tag = int(label) & MASK64, 1
        h = mix64(h ^ mix64(value + tag * GAMMA))
    return h
