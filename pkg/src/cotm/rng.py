"""Counter-keyed randomness.

Every draw is a pure function of a 64-bit seed and six integer coordinates
(epoch, example, site, i, j, k). Identical coordinates give identical
values regardless of evaluation order or thread count, so the packed
engine, the dense numpy fallback and the reference oracle can consume the
same random stream while computing in completely different orders, and
unread draws cost nothing.

A key is built by folding the coordinates through the splitmix64
finalizer, which is bijective on 64-bit words; a uniform in [0, 1) is the
top 53 bits of the key scaled by 2**-53. Probability comparisons are
strict (`u < p`), so p = 0 never selects and p = 1 always selects.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / float(1 << 53)

# Draw sites. Training sites must match the constants in _kernels.
SITE_TYPE_I = 1
SITE_TYPE_II = 2
SITE_TYPE_IA = 3
SITE_TYPE_IB = 4
SITE_SHUFFLE = 5
SITE_WEIGHT_INIT = 6
SITE_XOR_CLASS = 7
SITE_XOR_PATTERN = 8
SITE_XOR_PIXEL = 9
SITE_XOR_FLIP = 10
SITE_SUBSAMPLE = 11


def _mix_int(z: int) -> int:
    """splitmix64 finalizer on Python ints (masked 64-bit arithmetic)."""
    z = (z ^ (z >> 30)) * _M1 & _MASK
    z = (z ^ (z >> 27)) * _M2 & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping multiply)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class RandomSource:
    """Stateless source of uniform draws addressed by coordinates."""

    __slots__ = ("seed", "_base")

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 1 << 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self._base = _mix_int(self.seed ^ _GOLDEN)

    @property
    def base_key(self) -> int:
        """Pre-mixed seed key; kernels fold coordinates onto this."""
        return self._base

    def key(self, epoch, example, site, i=0, j=0, k=0) -> int:
        h = self._base
        for v in (epoch, example, site, i, j, k):
            h = _mix_int(h ^ int(v))
        return h

    def uniform(self, epoch, example, site, i=0, j=0, k=0) -> float:
        """Scalar uniform draw in [0, 1)."""
        return (self.key(epoch, example, site, i, j, k) >> 11) * _INV_2_53

    def uniform_array(self, epoch, example, site, i=0, j=0, k=0) -> np.ndarray:
        """Vectorized draws; each coordinate may be a scalar or an array.

        Coordinates broadcast against each other, so e.g. passing
        ``j=np.arange(n)[:, None], k=np.arange(w)[None, :]`` yields an
        (n, w) grid of independent draws.
        """
        h = np.uint64(self._base)
        with np.errstate(over="ignore"):  # wrapping multiply is the point
            for v in (epoch, example, site, i, j, k):
                h = _mix_array(h ^ np.asarray(v, dtype=np.uint64))
            return (h >> np.uint64(11)) * _INV_2_53

    def permutation(self, epoch, count: int) -> np.ndarray:
        """Deterministic permutation of range(count), keyed by (seed, epoch)."""
        keys = self.uniform_array(epoch, 0, SITE_SHUFFLE, 0, np.arange(count), 0)
        return np.argsort(keys, kind="stable").astype(np.int64)
