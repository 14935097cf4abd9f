"""Scalar L-Mul: the literal formula, the adder semantics and the bit-field datapath.

Three views of the same approximation ``x*y ~ (1 + x_m + y_m + 2**-l) * 2**(x_e+y_e)``:

* :func:`lmul_eq1` evaluates the formula exactly, with no carry handling.
* :func:`lmul_semantics` is what a single integer adder over the
  exponent+mantissa fields actually computes: a mantissa sum that reaches 1
  (or 2) carries into the exponent.
* :func:`lmul_bits` is the adder itself: ``field(x) + field(y) - offset``
  with the sign bit from XOR.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .fpcodec import DecodedFp, DomainError, FpBits, FpClass, FpFormat

__all__ = [
    "OffsetRule",
    "PIECEWISE_RULE",
    "SpecialPolicy",
    "DEFAULT_POLICY",
    "offset_exponent",
    "lmul_eq1",
    "lmul_semantics",
    "offset_constant",
    "lmul_bits",
]


@dataclass(frozen=True)
class OffsetRule:
    """How the correction exponent ``l`` is chosen from a mantissa width.

    ``constant is None`` selects the piecewise rule
    ``l(m) = m for m <= 3, 3 for m == 4, 4 for m > 4``.
    """

    constant: int | None = None

    def __post_init__(self):
        if self.constant is not None and self.constant < 0:
            raise ValueError("constant offset exponent must be >= 0")

    @classmethod
    def parse(cls, text: str | int) -> OffsetRule:
        """``"eq1"`` or ``"piecewise"`` for the piecewise rule, an integer for a constant."""
        if isinstance(text, int):
            return cls(text)
        t = text.strip().lower()
        if t in ("eq1", "piecewise"):
            return cls(None)
        if re.fullmatch(r"\d+", t):
            return cls(int(t))
        raise ValueError(f"bad offset rule {text!r}: expected 'eq1' or a non-negative integer")

    def __call__(self, m: int) -> int:
        return offset_exponent(m, self)

    def __str__(self) -> str:
        return "eq1" if self.constant is None else str(self.constant)


PIECEWISE_RULE = OffsetRule()


@dataclass(frozen=True)
class SpecialPolicy:
    """Subnormal inputs are flushed to zero unless ``raw_subnormals``.

    Zero, Inf and NaN handling is fixed: zero gives a signed zero,
    Inf*finite gives Inf, Inf*0 and NaN give NaN.  With ``raw_subnormals`` the
    subnormal field goes straight through the adder; results are then outside
    any equivalence guarantee.
    """

    raw_subnormals: bool = False


DEFAULT_POLICY = SpecialPolicy()


def offset_exponent(m: int, rule: OffsetRule = PIECEWISE_RULE) -> int:
    if m < 1:
        raise ValueError(f"mantissa width must be >= 1, got {m}")
    if rule.constant is not None:
        return rule.constant
    if m <= 3:
        return m
    if m == 4:
        return 3
    return 4


def _require_normal(*ops: DecodedFp):
    for d in ops:
        if d.cls is not FpClass.NORMAL:
            raise DomainError(f"operand is {d.cls.value}; reference L-Mul needs normal operands")


def _scale(v: Fraction, e: int) -> Fraction:
    return v * (Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e))


def lmul_eq1(x: DecodedFp, y: DecodedFp, l: int) -> Fraction:
    """``(1 + x_m + y_m + 2**-l) * 2**(x_e+y_e)`` exactly, signs multiplied."""
    _require_normal(x, y)
    mag = _scale(1 + x.fraction + y.fraction + Fraction(1, 1 << l), x.exponent + y.exponent)
    return mag * (x.sign * y.sign)


def lmul_semantics(x: DecodedFp, y: DecodedFp, l: int) -> Fraction:
    """Value the field adder produces, carries included.

    With ``s = x_m + y_m + 2**-l`` and ``c = floor(s)`` (0, 1 or 2) the adder
    yields ``(1 + s - c) * 2**(x_e + y_e + c)``.
    """
    _require_normal(x, y)
    s = x.fraction + y.fraction + Fraction(1, 1 << l)
    c = int(s)
    mag = _scale(1 + s - c, x.exponent + y.exponent + c)
    return mag * (x.sign * y.sign)


def offset_constant(fmt: FpFormat, l: int) -> int:
    """Integer subtracted from ``field(x) + field(y)``.

    Removes one exponent bias and adds ``2**-l`` in mantissa units.
    """
    if not 0 <= l <= fmt.man_bits:
        raise ValueError(f"l={l} outside 0..{fmt.man_bits} for {fmt.name}")
    return (fmt.bias << fmt.man_bits) - (1 << (fmt.man_bits - l))


def lmul_bits(
    x: FpBits,
    y: FpBits,
    rule: OffsetRule = PIECEWISE_RULE,
    policy: SpecialPolicy = DEFAULT_POLICY,
    *,
    precision: int | None = None,
    offset: int | None = None,
) -> FpBits:
    """Single-adder L-Mul on bit patterns.

    ``precision`` is the effective mantissa width fed to ``rule`` (defaults to
    the format's; pass ``k`` when the operands were truncated to ``k`` bits).
    ``offset`` overrides the computed constant, for fault injection.
    """
    fmt = x.format
    if y.format != fmt:
        raise ValueError(f"format mismatch: {fmt.name} vs {y.format.name}")
    if offset is None:
        m = fmt.man_bits if precision is None else precision
        offset = offset_constant(fmt, offset_exponent(m, rule))

    sign = (x.sign_bit ^ y.sign_bit) << fmt.field_bits
    fx, fy = x.field, y.field
    inf = fmt.inf_field
    qnan = inf | (1 << (fmt.man_bits - 1))

    def is_zero(f: int) -> bool:
        if policy.raw_subnormals:
            return f == 0
        return f >> fmt.man_bits == 0

    if fx > inf or fy > inf:
        return FpBits(fmt, sign | qnan)
    if fx == inf or fy == inf:
        return FpBits(fmt, sign | (qnan if is_zero(fx) or is_zero(fy) else inf))
    if is_zero(fx) or is_zero(fy):
        return FpBits(fmt, sign)
    r = fx + fy - offset
    if r < 0:
        return FpBits(fmt, sign)
    if r >= inf:
        return FpBits(fmt, sign | fmt.max_finite_field)
    return FpBits(fmt, sign | r)
