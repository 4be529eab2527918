# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Philox4x64-10 uniforms and exhaustive CHSH maximisation.

Both functions release the GIL, so the experiment runner can spread chunks
over a thread pool. Results are bit-identical to ``randbell._fallback``.
"""
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport fabs

import numpy as np

cdef extern from *:
    """
    #include <stdint.h>
    static inline void rb_mulhilo64(uint64_t a, uint64_t b, uint64_t *hi, uint64_t *lo) {
        unsigned __int128 p = (unsigned __int128)a * (unsigned __int128)b;
        *hi = (uint64_t)(p >> 64);
        *lo = (uint64_t)p;
    }
    """
    void rb_mulhilo64(uint64_t a, uint64_t b, uint64_t *hi, uint64_t *lo) nogil

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

BACKEND = "cython"


cdef inline void philox_block(uint64_t *ctr, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef uint64_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        rb_mulhilo64(M0, ctr[0], &hi0, &lo0)
        rb_mulhilo64(M1, ctr[2], &hi1, &lo1)
        ctr[0] = hi1 ^ ctr[1] ^ k0
        ctr[1] = lo1
        ctr[2] = hi0 ^ ctr[3] ^ k1
        ctr[3] = lo0
        k0 += W0
        k1 += W1


def philox_raw(uint64_t k0, uint64_t k1, c0, c1, c2, c3):
    """One Philox4x64-10 block for an explicit counter (test hook)."""
    cdef uint64_t ctr[4]
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3
    philox_block(ctr, k0, k1)
    return [ctr[0], ctr[1], ctr[2], ctr[3]]


def uniform_block(uint64_t seed, uint64_t start, Py_ssize_t count,
                  uint64_t substream, Py_ssize_t n):
    out = np.empty((count, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t ctr[4]
    cdef uint64_t stream, blk
    cdef Py_ssize_t i, j, w
    with nogil:
        for i in range(count):
            stream = start + <uint64_t>i
            j = 0
            blk = 1
            while j < n:
                ctr[0] = blk
                ctr[1] = 0
                ctr[2] = substream
                ctr[3] = 0
                philox_block(ctr, seed, stream)
                w = 0
                while w < 4 and j < n:
                    o[i, j] = <double>(ctr[w] >> 11) * TWO_M53
                    j += 1
                    w += 1
                blk += 1
    return out


def chsh_max_batch(double[:, :, ::1] E):
    cdef Py_ssize_t n = E.shape[0], ma = E.shape[1], mb = E.shape[2]
    values = np.empty(n, dtype=np.float64)
    witness = np.empty((n, 5), dtype=np.int64)
    cdef double[::1] val = values
    cdef int64_t[:, ::1] wit = witness
    cdef Py_ssize_t t, x, x2, y, y2, k
    cdef double a, b, c, d, best, s
    cdef int64_t bx, bx2, by, by2, bk
    with nogil:
        for t in range(n):
            best = -1.0
            bx = bx2 = by = by2 = bk = 0
            for x in range(ma - 1):
                for x2 in range(x + 1, ma):
                    for y in range(mb - 1):
                        for y2 in range(y + 1, mb):
                            a = E[t, x, y]
                            b = E[t, x, y2]
                            c = E[t, x2, y]
                            d = E[t, x2, y2]
                            for k in range(4):
                                if k == 0:
                                    s = fabs(((-a + b) + c) + d)
                                elif k == 1:
                                    s = fabs(((a - b) + c) + d)
                                elif k == 2:
                                    s = fabs(((a + b) - c) + d)
                                else:
                                    s = fabs(((a + b) + c) - d)
                                if s > best:
                                    best = s
                                    bx = x
                                    bx2 = x2
                                    by = y
                                    by2 = y2
                                    bk = k
            val[t] = best
            wit[t, 0] = bx
            wit[t, 1] = bx2
            wit[t, 2] = by
            wit[t, 3] = by2
            wit[t, 4] = bk
    return values, witness
