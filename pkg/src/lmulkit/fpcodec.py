"""Parametric IEEE-754 style formats with exact encode/decode.

Every finite value of a binary format is a dyadic rational, so values are
carried as :class:`fractions.Fraction` and no rounding ever happens outside
:func:`encode`, which truncates toward zero.

Bit layout is sign | exponent | mantissa, MSB first.  An all-ones exponent
field is reserved for Inf/NaN in every format, including fp8_e4m3 (the IEEE
convention, not the OCP "fn" variant).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

__all__ = [
    "FpClass",
    "FpFormat",
    "FpBits",
    "DecodedFp",
    "DomainError",
    "FP8_E4M3",
    "FP8_E5M2",
    "FP12_E5M6",
    "BF16",
    "FP16",
    "FORMATS",
    "get_format",
    "decode",
    "encode",
    "classify",
    "truncate_mantissa",
    "exact_mul",
    "to_fraction",
]


class DomainError(ValueError):
    """An operand lies outside the domain of an exact/analytic routine."""


class FpClass(enum.Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"


@dataclass(frozen=True)
class FpFormat:
    """Sign/exponent/mantissa widths plus exponent bias."""

    name: str
    exp_bits: int
    man_bits: int
    bias: int | None = None

    def __post_init__(self):
        if self.exp_bits < 2:
            raise ValueError(f"{self.name}: exp_bits must be >= 2, got {self.exp_bits}")
        if self.man_bits < 1:
            raise ValueError(f"{self.name}: man_bits must be >= 1, got {self.man_bits}")
        if self.width > 64:
            raise ValueError(f"{self.name}: total width {self.width} exceeds 64 bits")
        if self.bias is None:
            object.__setattr__(self, "bias", (1 << (self.exp_bits - 1)) - 1)

    @property
    def width(self) -> int:
        return 1 + self.exp_bits + self.man_bits

    @property
    def field_bits(self) -> int:
        """Width of the exponent+mantissa field (everything but the sign)."""
        return self.exp_bits + self.man_bits

    @property
    def exp_all_ones(self) -> int:
        return (1 << self.exp_bits) - 1

    @property
    def man_mask(self) -> int:
        return (1 << self.man_bits) - 1

    @property
    def field_mask(self) -> int:
        return (1 << self.field_bits) - 1

    @property
    def inf_field(self) -> int:
        """Magnitude field of +Inf; every field >= this is Inf or NaN."""
        return self.exp_all_ones << self.man_bits

    @property
    def max_finite_field(self) -> int:
        return self.inf_field - 1

    @property
    def emin(self) -> int:
        return 1 - self.bias

    @property
    def emax(self) -> int:
        return self.exp_all_ones - 1 - self.bias

    @property
    def hex_digits(self) -> int:
        return -(-self.width // 4)

    @property
    def max_finite(self) -> Fraction:
        return (2 - Fraction(1, 1 << self.man_bits)) * Fraction(2) ** self.emax

    def __str__(self) -> str:
        return self.name


FP8_E4M3 = FpFormat("fp8_e4m3", 4, 3)
FP8_E5M2 = FpFormat("fp8_e5m2", 5, 2)
FP12_E5M6 = FpFormat("fp12_e5m6", 5, 6)
BF16 = FpFormat("bf16", 8, 7)
FP16 = FpFormat("fp16", 5, 10)

FORMATS: dict[str, FpFormat] = {f.name: f for f in (FP8_E4M3, FP8_E5M2, FP12_E5M6, BF16, FP16)}


def get_format(name: str | FpFormat) -> FpFormat:
    if isinstance(name, FpFormat):
        return name
    try:
        return FORMATS[name]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; choose from {', '.join(FORMATS)}") from None


@dataclass(frozen=True)
class FpBits:
    """A raw bit pattern tagged with its format."""

    format: FpFormat
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.format.width):
            raise ValueError(f"bit pattern {self.bits:#x} does not fit {self.format.name}")

    @property
    def sign_bit(self) -> int:
        return self.bits >> self.format.field_bits

    @property
    def field(self) -> int:
        return self.bits & self.format.field_mask

    @property
    def exp_field(self) -> int:
        return self.field >> self.format.man_bits

    @property
    def man_field(self) -> int:
        return self.bits & self.format.man_mask

    def hex(self) -> str:
        return f"{self.bits:0{self.format.hex_digits}x}"

    @classmethod
    def from_hex(cls, fmt: FpFormat, text: str) -> FpBits:
        return cls(fmt, int(text, 16))

    @classmethod
    def from_fields(cls, fmt: FpFormat, sign: int, exp_field: int, man_field: int) -> FpBits:
        return cls(fmt, (sign << fmt.field_bits) | (exp_field << fmt.man_bits) | man_field)

    def __repr__(self) -> str:
        return f"FpBits({self.format.name}, 0x{self.hex()})"


@dataclass(frozen=True)
class DecodedFp:
    """Exact decomposition ``sign * (hidden + fraction) * 2**exponent``.

    ``fraction`` is the mantissa field over ``2**man_bits``.  For zero and
    subnormal values ``exponent`` is ``1 - bias``.
    """

    sign: int
    exponent: int
    fraction: Fraction
    cls: FpClass

    @property
    def is_finite(self) -> bool:
        return self.cls not in (FpClass.INF, FpClass.NAN)

    @property
    def value(self) -> Fraction:
        if self.cls is FpClass.NORMAL:
            mag = (1 + self.fraction) * _pow2(self.exponent)
        elif self.cls in (FpClass.SUBNORMAL, FpClass.ZERO):
            mag = self.fraction * _pow2(self.exponent)
        else:
            raise DomainError(f"{self.cls.value} has no finite value")
        return mag if self.sign > 0 else -mag


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def classify(b: FpBits) -> FpClass:
    fmt = b.format
    e, man = b.exp_field, b.man_field
    if e == fmt.exp_all_ones:
        return FpClass.INF if man == 0 else FpClass.NAN
    if e == 0:
        return FpClass.ZERO if man == 0 else FpClass.SUBNORMAL
    return FpClass.NORMAL


def decode(b: FpBits) -> DecodedFp:
    fmt = b.format
    cls = classify(b)
    sign = -1 if b.sign_bit else 1
    fraction = Fraction(b.man_field, 1 << fmt.man_bits)
    if cls is FpClass.NORMAL:
        exponent = b.exp_field - fmt.bias
    elif cls in (FpClass.INF, FpClass.NAN):
        exponent = fmt.emax + 1
    else:
        exponent = fmt.emin
    return DecodedFp(sign, exponent, fraction, cls)


def to_fraction(v) -> Fraction:
    """Exact rational for ints, Fractions, floats and decimal strings."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise DomainError(f"non-finite value {v!r}")
        return Fraction(v)
    return Fraction(v)


def encode(v, fmt: FpFormat) -> FpBits:
    """Encode a finite value, truncating toward zero.

    Overflow saturates to the largest finite magnitude; magnitudes below the
    smallest subnormal flush to a signed zero.
    """
    fv = to_fraction(v)
    negative = fv < 0 or (isinstance(v, float) and math.copysign(1.0, v) < 0)
    a = abs(fv)
    sign = 1 if negative else 0
    if a == 0:
        return FpBits.from_fields(fmt, sign, 0, 0)
    num, den = a.numerator, a.denominator
    e = num.bit_length() - den.bit_length()
    # floor(log2(a)) is e or e-1
    if (num << max(0, -e)) < (den << max(0, e)):
        e -= 1
    m = fmt.man_bits
    if e < fmt.emin:
        shift = m - fmt.emin
        man = (num << shift) // den if shift >= 0 else num // (den << -shift)
        return FpBits.from_fields(fmt, sign, 0, man)
    if e > fmt.emax:
        return FpBits(fmt, (sign << fmt.field_bits) | fmt.max_finite_field)
    shift = m - e
    sig = (num << shift) // den if shift >= 0 else num // (den << -shift)
    return FpBits.from_fields(fmt, sign, e + fmt.bias, sig - (1 << m))


def truncate_mantissa(b: FpBits, k: int) -> FpBits:
    """Keep the top ``k`` mantissa bits of a finite pattern; Inf/NaN pass through."""
    fmt = b.format
    if not 0 <= k <= fmt.man_bits:
        raise ValueError(f"k={k} outside 0..{fmt.man_bits} for {fmt.name}")
    if b.exp_field == fmt.exp_all_ones:
        return b
    drop = fmt.man_bits - k
    return FpBits(fmt, (b.bits >> drop) << drop)


def exact_mul(x: FpBits, y: FpBits) -> Fraction:
    """Exact product of two finite patterns (formats may differ)."""
    dx, dy = decode(x), decode(y)
    if not (dx.is_finite and dy.is_finite):
        raise DomainError("exact_mul is defined for finite operands only")
    return dx.value * dy.value
