"""Deterministic, platform-portable pseudo-random number generation.

The synthetic data generator must emit byte-identical streams for a fixed
seed on any platform, so it cannot depend on generators whose algorithms
are implementation details of a runtime. Two named public-domain
algorithms are implemented here:

  - splitmix64 (Steele, Lea, Vigna): seed expansion and stream derivation
  - xoshiro256** (Blackman, Vigna): the main 64-bit generator

Gaussian variates use the Box-Muller transform, which consumes exactly two
uniforms per pair, so the consumption order is fixed and reproducible.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


def _splitmix64_next(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def mix64(value: int) -> int:
    """splitmix64 finalizer; a full-avalanche 64-bit mix of ``value``."""
    out, _ = _splitmix64_next((value - 0x9E3779B97F4A7C15) & _MASK64)
    return out


def derive_stream_seed(seed: int, stream: int) -> int:
    """Derive the seed of an independent substream from a base seed.

    Substreams keep the generator's consumption order stable when one part
    of a simulation draws a variable number of values (fault injection must
    not perturb the baseline noise stream).
    """
    state = seed & _MASK64
    out = 0
    for _ in range(stream + 1):
        out, state = _splitmix64_next(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** generator with splitmix64 state initialization."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            out, state = _splitmix64_next(state)
            s.append(out)
        self._s = s
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def _random_open(self) -> float:
        """Uniform double in (0, 1]; safe as a log() argument."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Standard normal via Box-Muller; two uniforms per pair of draws."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
        else:
            u1 = self._random_open()
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            theta = 2.0 * math.pi * u2
            z = r * math.cos(theta)
            self._spare_normal = r * math.sin(theta)
        return mean + std * z

    def bounded_int(self, n: int) -> int:
        """Integer in [0, n) by the multiply-shift reduction.

        Bias is at most n / 2**64, negligible for the template-pool and
        filler-field sizes used here.
        """
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64
