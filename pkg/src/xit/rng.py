"""Deterministic counter-based random number generator.

Every shuffle in this package draws from this generator, never from the
platform RNG, so outputs are bit-stable across machines, Python versions
and numpy versions.  The generator is splitmix64 driven by a counter:

    out[i] = mix64(seed + (i + 1) * GOLDEN)   (all arithmetic mod 2**64)

where mix64 is the splitmix64 finalizer.  Because each output depends only
on (seed, i), blocks of draws can be produced vectorized with numpy and are
guaranteed identical to the scalar path; prefetching is pure caching and
never changes the stream.

Draw operations and their consumption are documented per method; callers
that promise determinism (the image transforms) rely on that contract.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# unit floats use the top 53 bits of each 64-bit draw
_INV_2_53 = 2.0 ** -53

_CHUNK = 4096


def _mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


class Rng:
    """Seeded deterministic generator (single-owner, not thread-safe).

    Same seed => same draw sequence, on every platform and run.  State is
    (seed, counter); the counter advances only through the documented draw
    operations below.
    """

    __slots__ = ("seed", "counter", "_cache", "_cache_pos")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0
        self._cache: list[int] = []
        self._cache_pos = 0

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, counter={self.counter})"

    # -- raw draws ---------------------------------------------------------

    def _refill(self, n: int = _CHUNK) -> None:
        # cache is a pure function of (seed, counter); recomputing is free
        self._cache = self._block_at(self.counter, n).tolist()
        self._cache_pos = 0

    def _block_at(self, start: int, n: int) -> np.ndarray:
        idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        z = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def u64(self) -> int:
        """Next raw 64-bit draw; consumes one counter step."""
        if self._cache_pos >= len(self._cache):
            self._refill()
        v = self._cache[self._cache_pos]
        self._cache_pos += 1
        self.counter += 1
        return v

    def u64_block(self, n: int) -> np.ndarray:
        """Next n raw draws as a uint64 array; identical to n calls of u64()."""
        out = self._block_at(self.counter, n)
        self.counter += n
        self._cache = []
        self._cache_pos = 0
        return out

    # -- documented draw operations ----------------------------------------

    def unit_float(self) -> float:
        """Uniform float in [0, 1); one counter step (top 53 bits)."""
        return (self.u64() >> 11) * _INV_2_53

    def unit_floats(self, n: int) -> np.ndarray:
        """n uniform floats in [0, 1); n counter steps, vectorized."""
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by masked rejection (no modulo bias).

        Consumes one draw per attempt; rejection probability is < 1/2.
        n == 1 returns 0 without consuming a draw.
        """
        if n <= 0:
            raise ValueError("bound must be positive")
        if n == 1:
            return 0
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.u64() & mask
            if r < n:
                return r

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates index permutation of range(n).

        Classic backwards sweep: for i = n-1 .. 1, draw j uniform in [0, i]
        via the same masked rejection as below().  Uniform over all n!
        permutations; a draw sequence identical to calling below(i + 1) at
        each step (inlined here for speed on large n).
        """
        idx = list(range(n))
        if n < 2:
            return idx
        cache = self._cache
        pos = self._cache_pos
        consumed = 0
        mask = (1 << (n - 1).bit_length()) - 1
        for i in range(n - 1, 0, -1):
            # mask for bound i+1 is (1 << i.bit_length()) - 1; i falls by one
            # per step, so a single halving check keeps it exact
            if i <= mask >> 1:
                mask >>= 1
            while True:
                if pos >= len(cache):
                    self.counter += consumed
                    consumed = 0
                    self._refill()
                    cache = self._cache
                    pos = 0
                j = cache[pos] & mask
                pos += 1
                consumed += 1
                if j <= i:
                    break
            idx[i], idx[j] = idx[j], idx[i]
        self.counter += consumed
        self._cache_pos = pos
        return idx


def fisher_yates(items, rng: Rng) -> list:
    """Return a uniform random permutation of items (input untouched).

    The multiset of items is preserved; every one of the n! orderings is
    equally likely under an ideal generator.
    """
    seq = list(items)
    perm = rng.permutation(len(seq))
    return [seq[j] for j in perm]
