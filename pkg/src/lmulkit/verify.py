"""Exhaustive check of the single-adder datapath against the carry semantics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fpcodec import FpFormat
from .lmul import PIECEWISE_RULE, OffsetRule, offset_constant, offset_exponent

__all__ = ["VerifyReport", "verify_exhaustive", "MAX_EXHAUSTIVE_BITS"]

MAX_EXHAUSTIVE_BITS = 8


@dataclass
class VerifyReport:
    format: str
    l: int
    offset: int
    total_pairs: int
    in_range_pairs: int
    mismatches: list[tuple[str, str]] = field(default_factory=list)
    sign_failures: int = 0
    commutativity_failures: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.sign_failures and not self.commutativity_failures

    def summary(self) -> str:
        return (f"{self.format}: {len(self.mismatches)} mismatches / {self.in_range_pairs} in-range pairs; "
                f"sign failures {self.sign_failures}; commutativity failures {self.commutativity_failures}")

    def to_json(self) -> str:
        doc = {"format": self.format, "l": self.l, "offset": self.offset,
               "total_pairs": self.total_pairs, "in_range_pairs": self.in_range_pairs,
               "mismatch_count": len(self.mismatches),
               "mismatches": [list(p) for p in self.mismatches],
               "sign_failures": self.sign_failures,
               "commutativity_failures": self.commutativity_failures, "ok": self.ok}
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["x,y"] + [f"{a},{b}" for a, b in self.mismatches]
        return "\n".join(lines) + "\n"


def _semantics_fields(fmt: FpFormat, xf, yf, l: int):
    """Carry semantics on normal magnitude fields: (significand, unbiased exponent).

    Significand is an integer in ``[2**m, 2**(m+1))``; value is
    ``sig * 2**(exp - m)``.
    """
    m = fmt.man_bits
    xm, ym = xf & fmt.man_mask, yf & fmt.man_mask
    xe = (xf >> m) - fmt.bias
    ye = (yf >> m) - fmt.bias
    s = xm + ym + (1 << (m - l))
    carry = s >> m
    sig = (1 << m) + s - (carry << m)
    return sig, xe + ye + carry


def verify_exhaustive(fmt: FpFormat, rule: OffsetRule = PIECEWISE_RULE, offset_delta: int = 0) -> VerifyReport:
    """Compare every normal pair's adder output with the carry semantics.

    Pairs whose exact semantic result lies outside the normal range are
    excluded from the equivalence count.  ``offset_delta`` perturbs the
    adder constant (fault injection).
    """
    if fmt.width > MAX_EXHAUSTIVE_BITS:
        raise ValueError(f"{fmt.name} is {fmt.width}-bit; exhaustive verification is limited to "
                         f"{MAX_EXHAUSTIVE_BITS}-bit formats, use sampled checks instead")
    l = offset_exponent(fmt.man_bits, rule)
    offset = offset_constant(fmt, l) + offset_delta
    npat = 1 << fmt.width
    pats = np.arange(npat, dtype=np.uint64)
    xs = np.repeat(pats, npat)
    ys = np.tile(pats, npat)
    out = kernels.lmul_bits_batch(xs, ys, fmt.exp_bits, fmt.man_bits, offset, True)
    out_t = kernels.lmul_bits_batch(ys, xs, fmt.exp_bits, fmt.man_bits, offset, True)

    fb = np.uint64(fmt.field_bits)
    fmask = np.uint64(fmt.field_mask)
    xf = (xs & fmask).astype(np.int64)
    yf = (ys & fmask).astype(np.int64)
    xsgn, ysgn, osgn = xs >> fb, ys >> fb, out >> fb
    exp_of = lambda f: f >> fmt.man_bits
    x_norm = (exp_of(xf) > 0) & (exp_of(xf) < fmt.exp_all_ones)
    y_norm = (exp_of(yf) > 0) & (exp_of(yf) < fmt.exp_all_ones)
    pair = x_norm & y_norm

    sig, ex = _semantics_fields(fmt, xf, yf, l)
    in_range = pair & (ex >= fmt.emin) & (ex <= fmt.emax)

    of = (out & fmask).astype(np.int64)
    o_exp = exp_of(of)
    o_sig = (1 << fmt.man_bits) + (of & fmt.man_mask)
    o_norm = (o_exp > 0) & (o_exp < fmt.exp_all_ones)
    agree = o_norm & (o_sig == sig) & (o_exp - fmt.bias == ex) & (osgn == (xsgn ^ ysgn))
    bad = np.nonzero(in_range & ~agree)[0]
    width = fmt.hex_digits
    mismatches = [(f"{int(xs[i]):0{width}x}", f"{int(ys[i]):0{width}x}") for i in bad]

    x_fin_nz = (xf > 0) & (exp_of(xf) < fmt.exp_all_ones)
    y_fin_nz = (yf > 0) & (exp_of(yf) < fmt.exp_all_ones)
    sign_fail = int(np.count_nonzero(x_fin_nz & y_fin_nz & (osgn != (xsgn ^ ysgn))))
    comm_fail = int(np.count_nonzero(out != out_t))
    return VerifyReport(fmt.name, l, offset, npat * npat, int(np.count_nonzero(in_range)),
                        mismatches, sign_fail, comm_fail)
