"""Seedable, platform-independent random number generation.

Every randomized operation in this package draws from :class:`Pcg32`
(PCG-XSH-RR: 64-bit LCG state, 32-bit xorshift/rotate output) so that a
fixed seed reproduces results bit-for-bit regardless of platform or
Python version. The bounded-draw helpers use rejection sampling and are
exactly uniform.
"""

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1
_MULTIPLIER = 6364136223846793005

# Arbitrary fixed stream selector; part of the reproducibility contract.
DEFAULT_STREAM = 54


class Pcg32:
    """PCG-XSH-RR generator with an explicit seed and stream."""

    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self._state = 0
        self._inc = ((stream << 1) | 1) & _MASK64
        self.next_u32()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        """Next raw 32-bit output."""
        old = self._state
        self._state = (old * _MULTIPLIER + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & _MASK32

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        threshold = (1 << 32) % n
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.randbelow(hi - lo + 1)

    def random(self) -> float:
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.next_u32() / 4294967296.0


def derive_seed(seed: int, index: int) -> int:
    """Per-item seed for batch runs: the base seed XOR the item index."""
    return (seed ^ index) & _MASK64
