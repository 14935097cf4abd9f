"""Pure-Python/numpy implementations of the hot loops.

Semantics are the contract; ``_ckernels`` must agree bit for bit.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK64 = (1 << 64) - 1
_XS_MULT = 0x2545F4914F6CDD1D


def xorshift64star_fill(state: int, n: int) -> tuple[np.ndarray, int]:
    """Return ``(outputs, new_state)`` after ``n`` xorshift64* steps."""
    out = [0] * n
    x = state
    for i in range(n):
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        out[i] = (x * _XS_MULT) & _MASK64
    return np.array(out, dtype=np.uint64), x


def lmul_bits_batch(xs, ys, exp_bits: int, man_bits: int, offset: int,
                    flush_subnormals: bool = True) -> np.ndarray:
    """Element-wise single-adder L-Mul over raw bit patterns of one format."""
    xs = np.asarray(xs, dtype=np.uint64)
    ys = np.asarray(ys, dtype=np.uint64)
    if xs.shape != ys.shape:
        raise ValueError("operand arrays differ in length")
    field_bits = exp_bits + man_bits
    field_mask = np.uint64((1 << field_bits) - 1)
    inf_field = ((1 << exp_bits) - 1) << man_bits
    qnan = np.uint64(inf_field | (1 << (man_bits - 1)))
    fb = np.uint64(field_bits)

    s = ((xs ^ ys) >> fb) << fb
    fx = (xs & field_mask).astype(np.int64)
    fy = (ys & field_mask).astype(np.int64)
    xn, yn = fx > inf_field, fy > inf_field
    xi, yi = fx == inf_field, fy == inf_field
    if flush_subnormals:
        xz, yz = (fx >> man_bits) == 0, (fy >> man_bits) == 0
    else:
        xz, yz = fx == 0, fy == 0

    r = fx + fy - offset
    mag = np.where(r < 0, 0, np.where(r >= inf_field, inf_field - 1, r))
    mag = np.where(xz | yz, 0, mag)
    mag = np.where(xi | yi, np.where(xz | yz, int(qnan), inf_field), mag)
    mag = np.where(xn | yn, int(qnan), mag)
    return s | mag.astype(np.uint64)
