import struct
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmulkit.fpcodec import (
    BF16, FP8_E4M3, FP8_E5M2, FP12_E5M6, FP16, FORMATS, DomainError, FpBits, FpClass, FpFormat,
    classify, decode, encode, exact_mul, get_format, truncate_mantissa,
)

EIGHT_BIT = [FP8_E4M3, FP8_E5M2]


def f32_bits(x: float) -> int:
    return struct.unpack(">I", struct.pack(">f", x))[0]


def f32_from_bits(b: int) -> float:
    return struct.unpack(">f", struct.pack(">I", b))[0]


def test_builtin_formats():
    assert {f.name: (f.exp_bits, f.man_bits) for f in FORMATS.values()} == {
        "fp8_e4m3": (4, 3), "fp8_e5m2": (5, 2), "fp12_e5m6": (5, 6), "bf16": (8, 7), "fp16": (5, 10)}
    assert FP8_E4M3.bias == 7 and FP8_E5M2.bias == 15 and BF16.bias == 127 and FP16.bias == 15
    assert FP12_E5M6.width == 12


@pytest.mark.parametrize("e,m", [(1, 3), (4, 0), (40, 30)])
def test_format_invariants_rejected(e, m):
    with pytest.raises(ValueError):
        FpFormat("bad", e, m)


def test_get_format_unknown():
    with pytest.raises(ValueError, match="unknown format"):
        get_format("fp7")


def test_decode_examples():
    d = decode(FpBits(FP8_E4M3, 0b0_1000_000))
    assert d.value == 2 and d.cls is FpClass.NORMAL
    z = decode(FpBits(BF16, 0))
    assert z.value == 0 and z.cls is FpClass.ZERO and z.sign == 1


def test_decode_bf16_against_host_binary32():
    bits = f32_bits(3.75) >> 16
    d = decode(FpBits(BF16, bits))
    assert (d.sign, d.exponent, d.fraction) == (1, 1, Fraction(7, 8))
    assert float(d.value) == f32_from_bits(bits << 16)


def test_decode_every_bf16_pattern_matches_binary32():
    # bf16 is the top half of binary32, so the host decoder is an independent oracle
    for b in range(1 << 16):
        d = decode(FpBits(BF16, b))
        host = f32_from_bits(b << 16)
        if d.cls is FpClass.NAN:
            assert host != host
        elif d.cls is FpClass.INF:
            assert host == d.sign * float("inf")
        else:
            assert float(d.value) == host


def test_encode_examples():
    assert encode(2, FP8_E4M3).bits == 0b0_1000_000
    assert encode(Fraction(17, 16), FP8_E4M3) == encode(1, FP8_E4M3)
    top = encode(2**20, FP8_E4M3)
    assert top.bits == 0b0_1110_111
    assert decode(top).value == FP8_E4M3.max_finite == 240
    assert encode(-(2**20), FP8_E5M2).bits == 0b1_11110_11


def test_encode_underflow_and_signed_zero():
    tiny = Fraction(1, 2**40)
    assert encode(tiny, FP8_E4M3).bits == 0
    assert encode(-tiny, FP8_E4M3).bits == 0x80
    assert encode(-0.0, FP8_E4M3).bits == 0x80
    # smallest subnormal of e4m3 is 2**-9
    assert encode(Fraction(3, 2**10), FP8_E4M3).bits == 0x01


@pytest.mark.parametrize("fmt", EIGHT_BIT, ids=lambda f: f.name)
def test_round_trip_exhaustive(fmt):
    for b in range(256):
        p = FpBits(fmt, b)
        cls = classify(p)
        if cls in (FpClass.INF, FpClass.NAN):
            continue
        if cls is FpClass.ZERO:
            # Fractions carry no signed zero; the sign-aware path is float -0.0
            assert encode(-0.0 if p.sign_bit else 0.0, fmt) == p
        else:
            assert encode(decode(p).value, fmt) == p


@given(st.floats(min_value=2.0**-126, max_value=3.0e38, allow_nan=False, allow_infinity=False),
       st.booleans())
def test_bf16_encode_is_binary32_truncation(x, neg):
    # for binary32-exact inputs, truncation toward zero keeps the top 16 bits
    x32 = f32_from_bits(f32_bits(x))
    if neg:
        x32 = -x32
    assert encode(x32, BF16).bits == f32_bits(x32) >> 16


def test_classify_examples():
    assert classify(FpBits(FP8_E4M3, 0)) is FpClass.ZERO
    assert classify(FpBits(FP8_E4M3, 0b0_1111_000)) is FpClass.INF
    assert classify(FpBits(FP8_E4M3, 0b0_1111_010)) is FpClass.NAN
    assert classify(FpBits(FP8_E4M3, 0b0_0000_010)) is FpClass.SUBNORMAL
    assert classify(FpBits(FP8_E4M3, 0b0_0001_000)) is FpClass.NORMAL


def test_subnormal_decode():
    d = decode(FpBits(FP8_E4M3, 0b1_0000_011))
    assert d.value == -Fraction(3, 8) * Fraction(1, 2**6)


def test_truncate_examples():
    x = FpBits.from_fields(BF16, 0, 130, 0b1011011)
    assert truncate_mantissa(x, 7) == x
    assert truncate_mantissa(x, 3).man_field == 0b1010000
    with pytest.raises(ValueError):
        truncate_mantissa(x, 8)
    with pytest.raises(ValueError):
        truncate_mantissa(x, -1)


def test_truncate_brute_force_bf16():
    for man in range(128):
        x = FpBits.from_fields(BF16, 0, 127, man)
        for k in range(8):
            xk = Fraction((man >> (7 - k)) << (7 - k), 128)
            assert decode(truncate_mantissa(x, k)).fraction == xk


def test_truncate_monotone_positive():
    for b in range(1, 0x78):
        x = FpBits(FP8_E4M3, b)
        for k in range(4):
            t = truncate_mantissa(x, k)
            dropped = x.man_field & ((1 << (3 - k)) - 1)
            assert decode(t).value <= decode(x).value
            assert (decode(t).value == decode(x).value) == (dropped == 0)


def test_hex_round_trip():
    x = FpBits(FP12_E5M6, 0xABC)
    assert x.hex() == "abc"
    assert FpBits.from_hex(FP12_E5M6, "abc") == x
    assert FpBits(FP16, 0x3C00).hex() == "3c00"
    assert FpBits(FP8_E4M3, 0x5).hex() == "05"
    with pytest.raises(ValueError):
        FpBits(FP8_E4M3, 0x100)


def test_exact_mul_examples():
    a, b = encode(Fraction(3, 2), BF16), encode(Fraction(5, 2), BF16)
    assert exact_mul(a, b) == Fraction(15, 4)
    one = encode(1, FP8_E4M3)
    for bits in range(0x78):
        x = FpBits(FP8_E4M3, bits)
        assert exact_mul(x, one) == decode(x).value


def test_exact_mul_all_e4m3_normal_pairs_integer_oracle():
    def sig_exp(b):
        e, m = (b >> 3) & 0xF, b & 7
        return (8 + m) * (-1 if b >> 7 else 1), e - 7 - 3

    normals = [b for b in range(256) if 0 < (b >> 3) & 0xF < 15]
    for x in normals:
        sx, ex = sig_exp(x)
        for y in normals:
            sy, ey = sig_exp(y)
            want = Fraction(sx * sy) * Fraction(2) ** (ex + ey)
            got = exact_mul(FpBits(FP8_E4M3, x), FpBits(FP8_E4M3, y))
            assert got == want
            assert got == exact_mul(FpBits(FP8_E4M3, y), FpBits(FP8_E4M3, x))


def test_exact_mul_rejects_specials():
    inf = FpBits(FP8_E4M3, 0x78)
    with pytest.raises(DomainError):
        exact_mul(inf, encode(1, FP8_E4M3))
