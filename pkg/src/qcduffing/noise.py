"""Reproducible complex Wiener increments from a counter-based generator.

Every increment is a pure function of ``(seed, stream, counter)``: a single
Philox4x64-10 block keyed by ``(seed, stream)`` at counter ``(counter, 0, 0, 0)``
is mapped through Box-Muller to two independent standard normals. The
increment for step size ``dt`` is

    dxi = sqrt(dt/2) * (z0 + 1j*z1)

so that E[dxi] = 0, E[dxi**2] = 0 and E[|dxi|**2] = dt.

Because nothing but the counter changes, a fork is just a copy, and two
trajectories that share ``(seed, stream, counter)`` see bit-identical noise.
The integration kernels call :func:`gaussian_pair` directly.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, replace

import numba as nb
import numpy as np

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi

# stream tags for the key's second word
NOISE_STREAM = 0
KICK_STREAM = 1


@nb.njit(inline="always", cache=True)
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return lo, hi


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x64 block function (Salmon et al., SC'11)."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        lo0, hi0 = _mulhilo(_M0, c0)
        lo1, hi1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(inline="always", cache=True)
def gaussian_pair(k0, k1, counter):
    """Two independent N(0, 1) variates for block ``counter`` under key (k0, k1)."""
    w0, w1, _, _ = philox4x64(counter, _ZERO, _ZERO, _ZERO, k0, k1)
    u1 = np.float64((w0 >> _S11) + _ONE) * _INV53  # (0, 1], safe for log
    u2 = np.float64(w1 >> _S11) * _INV53
    r = math.sqrt(-2.0 * math.log(u1))
    a = _TWO_PI * u2
    return r * math.cos(a), r * math.sin(a)


@nb.njit(cache=True)
def _fill_increments(k0, k1, counter, n, scale, out):
    for i in range(n):
        z0, z1 = gaussian_pair(k0, k1, counter + np.uint64(i))
        out[i] = complex(scale * z0, scale * z1)


def _key(seed: int, stream: int) -> tuple[np.uint64, np.uint64]:
    return np.uint64(seed % 2**64), np.uint64(stream % 2**64)


@dataclass
class NoiseStream:
    """Handle on one replayable noise sequence.

    ``counter`` is the index of the next block to be consumed. Streams are
    cheap values: copy them with :meth:`fork` rather than sharing one
    between trajectories.
    """

    seed: int
    counter: int = 0
    stream: int = NOISE_STREAM

    def __post_init__(self):
        if self.counter < 0:
            raise ValueError("counter must be non-negative")

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return _key(self.seed, self.stream)

    def fork(self) -> "NoiseStream":
        """Independent handle replaying the same sequence from the current counter."""
        return replace(self)

    def substream(self, stream: int) -> "NoiseStream":
        """Same seed, different key word: a statistically independent sequence."""
        return NoiseStream(self.seed, 0, stream)

    def next_increment(self, dt: float) -> complex:
        if dt < 0:
            raise ValueError(f"dt must be >= 0, got {dt}")
        k0, k1 = self.key
        z0, z1 = gaussian_pair(k0, k1, np.uint64(self.counter))
        self.counter += 1
        s = math.sqrt(0.5 * dt)
        return complex(s * z0, s * z1)

    def increments(self, n: int, dt: float) -> np.ndarray:
        """The next ``n`` increments as a complex array (advances the counter by n)."""
        if dt < 0:
            raise ValueError(f"dt must be >= 0, got {dt}")
        out = np.empty(n, dtype=np.complex128)
        k0, k1 = self.key
        _fill_increments(k0, k1, np.uint64(self.counter), n, math.sqrt(0.5 * dt), out)
        self.counter += n
        return out

    def advance(self, n: int) -> None:
        """Skip ``n`` blocks (used after a kernel consumed them internally)."""
        self.counter += n

    def unit_direction(self) -> tuple[float, float]:
        """A uniformly distributed unit vector in the plane (isotropic Gaussian angle)."""
        k0, k1 = self.key
        z0, z1 = gaussian_pair(k0, k1, np.uint64(self.counter))
        self.counter += 1
        r = math.hypot(z0, z1)
        return z0 / r, z1 / r


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from a tuple of integers (independent of PYTHONHASHSEED)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(struct.pack("<Q", int(p) % 2**64))
    return int.from_bytes(h.digest(), "little")
