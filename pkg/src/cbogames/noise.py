"""Counter-based random streams.

Every deviate is a pure function of ``(seed, address)``, computed with the
Philox4x32-10 block cipher.  Nothing is stateful, so two simulations that
share an address space see the same noise no matter how the work is split
across threads or in which order particles are visited.

Address layout of one Philox counter (four 32-bit words)::

    word0  step index k (or block index for flat streams)
    word1  coordinate pair index (coordinates 2j and 2j+1 share a counter)
    word2  particle index i
    word3  player index m | (tag << 16)

Each counter gives two standard normals through Box-Muller (cos/sin lanes).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NoiseStream",
    "philox4x32",
    "TAG_DYNAMICS",
    "TAG_INIT",
    "TAG_PROBE",
    "TAG_SAMPLE",
]

TAG_DYNAMICS = 0
TAG_INIT = 1
TAG_PROBE = 2
TAG_SAMPLE = 3

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_ROUNDS = 10
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def philox4x32(c0, c1, c2, c3, key0: int, key1: int):
    """Philox4x32-10 on arrays of 32-bit counter words.

    Counter words may be any integer arrays (broadcast together); values are
    reduced modulo 2**32.  Returns four ``uint64`` arrays holding the 32-bit
    output words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = int(key0) & 0xFFFFFFFF
    k1 = int(key1) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint64(k0),
            lo1,
            hi0 ^ c3 ^ np.uint64(k1),
            lo0,
        )
    return c0, c1, c2, c3


def _unit_open(hi, lo):
    # 53-bit uniform strictly inside (0, 1)
    bits = ((hi >> np.uint64(5)) << np.uint64(26)) | (lo >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * _INV_2_53


class NoiseStream:
    """Stream-addressable standard normal and uniform deviates.

    Parameters
    ----------
    seed : int
        64-bit seed; it becomes the Philox key.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = seed
        self._k0 = seed & 0xFFFFFFFF
        self._k1 = (seed >> 32) & 0xFFFFFFFF

    def __repr__(self):
        return f"NoiseStream(seed={self.seed})"

    def _words(self, k, pair, i, m, tag):
        m = np.asarray(m, dtype=np.uint64)
        if np.any(m >= np.uint64(1 << 16)):
            raise ValueError("player index must be below 65536")
        w3 = m | (np.uint64(tag) << np.uint64(16))
        return philox4x32(k, pair, i, w3, self._k0, self._k1)

    def normal(self, k, players, particles, ncoord: int, tag: int = TAG_DYNAMICS):
        """Normals for address ``(m, i, k, c)`` with c in ``range(ncoord)``.

        ``players`` and ``particles`` are equal-length integer arrays naming
        the rows; the result has shape ``(len(rows), ncoord)``.
        """
        players = np.asarray(players, dtype=np.uint64).reshape(-1, 1)
        particles = np.asarray(particles, dtype=np.uint64).reshape(-1, 1)
        npairs = (ncoord + 1) // 2
        pair = np.arange(npairs, dtype=np.uint64).reshape(1, -1)
        w0, w1, w2, w3 = self._words(k, pair, particles, players, tag)
        u1 = _unit_open(w0, w1)
        u2 = _unit_open(w2, w3)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = _TWO_PI * u2
        out = np.empty((players.shape[0], 2 * npairs))
        out[:, 0::2] = radius * np.cos(angle)
        out[:, 1::2] = radius * np.sin(angle)
        return out[:, :ncoord]

    def uniform(self, k, players, particles, ncoord: int, tag: int = TAG_INIT):
        """Uniform (0, 1) deviates on the same address layout as :meth:`normal`."""
        players = np.asarray(players, dtype=np.uint64).reshape(-1, 1)
        particles = np.asarray(particles, dtype=np.uint64).reshape(-1, 1)
        npairs = (ncoord + 1) // 2
        pair = np.arange(npairs, dtype=np.uint64).reshape(1, -1)
        w0, w1, w2, w3 = self._words(k, pair, particles, players, tag)
        out = np.empty((players.shape[0], 2 * npairs))
        out[:, 0::2] = _unit_open(w0, w1)
        out[:, 1::2] = _unit_open(w2, w3)
        return out[:, :ncoord]

    def normal_block(self, block: int, start: int, count: int, ncoord: int,
                     tag: int = TAG_SAMPLE, lane: int = 0):
        """``count`` rows of normals from a flat stream.

        Row ``j`` is addressed as particle ``start + j`` of player ``lane`` at
        step ``block``; blocks and lanes give disjoint sub-streams.
        """
        if start + count > 2**32:
            raise ValueError("flat stream exhausted; use another block")
        rows = np.arange(start, start + count, dtype=np.uint64)
        return self.normal(block, np.full(count, lane, dtype=np.uint64), rows, ncoord, tag=tag)

    def uniform_block(self, block: int, start: int, count: int, ncoord: int,
                      tag: int = TAG_SAMPLE, lane: int = 0):
        if start + count > 2**32:
            raise ValueError("flat stream exhausted; use another block")
        rows = np.arange(start, start + count, dtype=np.uint64)
        return self.uniform(block, np.full(count, lane, dtype=np.uint64), rows, ncoord, tag=tag)
