# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot loops; see _pykernels for the reference semantics."""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

BACKEND = "cython"

cdef uint64_t XS_MULT = 0x2545F4914F6CDD1DULL


def xorshift64star_fill(uint64_t state, Py_ssize_t n):
    """Return ``(outputs, new_state)`` after ``n`` xorshift64* steps."""
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] view = out
    cdef uint64_t x = state
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            x ^= x >> 12
            x ^= x << 25
            x ^= x >> 27
            view[i] = x * XS_MULT
    return out, x


def lmul_bits_batch(const uint64_t[::1] xs, const uint64_t[::1] ys,
                    int exp_bits, int man_bits, int64_t offset,
                    bint flush_subnormals=True):
    """Element-wise single-adder L-Mul over raw bit patterns of one format."""
    cdef Py_ssize_t n = xs.shape[0]
    if ys.shape[0] != n:
        raise ValueError("operand arrays differ in length")
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] res = out
    cdef int field_bits = exp_bits + man_bits
    cdef uint64_t field_mask = (<uint64_t>1 << field_bits) - 1
    cdef uint64_t man_mask = (<uint64_t>1 << man_bits) - 1
    cdef uint64_t exp_ones = (<uint64_t>1 << exp_bits) - 1
    cdef uint64_t inf_field = exp_ones << man_bits
    cdef uint64_t qnan = inf_field | (<uint64_t>1 << (man_bits - 1))
    cdef uint64_t x, y, fx, fy, s
    cdef int64_t r
    cdef bint xz, yz, xi, yi, xn, yn
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            x = xs[i]
            y = ys[i]
            s = ((x ^ y) >> field_bits) << field_bits
            fx = x & field_mask
            fy = y & field_mask
            xn = fx > inf_field
            yn = fy > inf_field
            xi = fx == inf_field
            yi = fy == inf_field
            xz = fx == 0 or (flush_subnormals and (fx >> man_bits) == 0)
            yz = fy == 0 or (flush_subnormals and (fy >> man_bits) == 0)
            if xn or yn:
                res[i] = s | qnan
            elif xi or yi:
                res[i] = s | (qnan if (xz or yz) else inf_field)
            elif xz or yz:
                res[i] = s
            else:
                r = <int64_t>(fx + fy) - offset
                if r < 0:
                    res[i] = s
                elif <uint64_t>r >= inf_field:
                    res[i] = s | (inf_field - 1)
                else:
                    res[i] = s | <uint64_t>r
    return out
