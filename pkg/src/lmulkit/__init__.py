"""Linear-complexity multiplication: approximate FP products with one integer add."""

from .fpcodec import (
    BF16,
    FORMATS,
    FP8_E4M3,
    FP8_E5M2,
    FP12_E5M6,
    FP16,
    DecodedFp,
    DomainError,
    FpBits,
    FpClass,
    FpFormat,
    classify,
    decode,
    encode,
    exact_mul,
    get_format,
    truncate_mantissa,
)
from .kernels import BACKEND
from .lmul import (
    DEFAULT_POLICY,
    PIECEWISE_RULE,
    OffsetRule,
    SpecialPolicy,
    lmul_bits,
    lmul_eq1,
    lmul_semantics,
    offset_constant,
    offset_exponent,
)

__version__ = "0.1.0"
