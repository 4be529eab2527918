"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function here returns exactly the same bits as its compiled twin; the
test suite checks that whenever the extension is importable.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

BACKEND = "python"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

# bound the working set of the vectorised CHSH search
_CHSH_CELLS = 1 << 22


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a_lo, a_hi = a & _LO32, a >> _S32
    b_lo, b_hi = b & _LO32, b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _LO32) + lo_hi
    hi = a_hi * b_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (lo_lo & _LO32)
    return hi, lo


def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


def philox_raw(k0: int, k1: int, c0: int, c1: int, c2: int, c3: int) -> list[int]:
    """One Philox4x64-10 block for an explicit counter (test hook)."""
    words = [np.array([v], dtype=np.uint64) for v in (c0, c1, c2, c3)]
    keys = [np.array([v], dtype=np.uint64) for v in (k0, k1)]
    with np.errstate(over="ignore"):
        out = _philox(*words, *keys)
    return [int(w[0]) for w in out]


def uniform_block(seed: int, start: int, count: int, substream: int, n: int) -> np.ndarray:
    out = np.empty((count, n), dtype=np.float64)
    if count == 0 or n == 0:
        return out
    with np.errstate(over="ignore"):
        streams = np.uint64(start) + np.arange(count, dtype=np.uint64)
        k0 = np.full(count, seed, dtype=np.uint64)
        zeros = np.zeros(count, dtype=np.uint64)
        sub = np.full(count, substream, dtype=np.uint64)
        for blk in range((n + 3) // 4):
            ctr0 = np.full(count, blk + 1, dtype=np.uint64)
            words = _philox(ctr0, zeros, sub, zeros, k0, streams)
            for w in range(4):
                j = 4 * blk + w
                if j >= n:
                    break
                out[:, j] = (words[w] >> _S11).astype(np.float64) * _TWO_M53
    return out


@lru_cache(maxsize=None)
def _witness_table(ma: int, mb: int) -> np.ndarray:
    rows = itertools.combinations(range(ma), 2)
    cols = list(itertools.combinations(range(mb), 2))
    return np.array(
        [(x, x2, y, y2, k) for x, x2 in rows for y, y2 in cols for k in range(4)],
        dtype=np.int64,
    )


def chsh_max_batch(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    E = np.ascontiguousarray(E, dtype=np.float64)
    n, ma, mb = E.shape
    table = _witness_table(ma, mb)
    x, x2, y, y2 = (table[::4, i] for i in range(4))
    values = np.empty(n, dtype=np.float64)
    witness = np.empty((n, 5), dtype=np.int64)
    step = max(1, _CHSH_CELLS // len(table))
    for lo in range(0, n, step):
        blk = E[lo:lo + step]
        a, b, c, d = blk[:, x, y], blk[:, x, y2], blk[:, x2, y], blk[:, x2, y2]
        # same operation order as the compiled loop, minus sign on term k
        s = np.empty((len(blk), len(x), 4))
        s[:, :, 0] = np.abs(((-a + b) + c) + d)
        s[:, :, 1] = np.abs(((a - b) + c) + d)
        s[:, :, 2] = np.abs(((a + b) - c) + d)
        s[:, :, 3] = np.abs(((a + b) + c) - d)
        s = s.reshape(len(blk), -1)
        best = np.argmax(s, axis=1)
        values[lo:lo + step] = s[np.arange(len(blk)), best]
        witness[lo:lo + step] = table[best]
    return values, witness
