"""Small dense tensors of format-tagged elements, L-Matmul and a toy attention layer.

A :class:`Tensor` carries raw bit patterns (``bits``), the unquantized
source values (``values``, the shadow), or both.  Exact products and sums
stay as :class:`~fractions.Fraction`; softmax and the ``1/sqrt(d)`` scale run
in binary64.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fpcodec import FP8_E4M3, FpBits, FpFormat, decode, encode, get_format, truncate_mantissa
from .lmul import DEFAULT_POLICY, PIECEWISE_RULE, OffsetRule, SpecialPolicy, lmul_bits

__all__ = [
    "Tensor",
    "AccumPolicy",
    "Exact",
    "LMulAttention",
    "ErrorMetrics",
    "elementwise_lmul",
    "lmatmul",
    "exact_matmul",
    "softmax_rows",
    "attention_forward",
    "error_metrics",
    "truncate_tensor",
    "transpose",
    "random_attention_inputs",
]


class AccumPolicy(enum.Enum):
    EXACT = "exact"
    WIDE_FLOAT = "wide_float"
    FP8_E4M3 = "fp8_e4m3"


@dataclass(frozen=True)
class Tensor:
    shape: tuple[int, ...]
    format: FpFormat
    bits: tuple[int, ...] | None = None
    values: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        size = math.prod(self.shape)
        if self.bits is None and self.values is None:
            raise ValueError("tensor needs bits, values or both")
        for name in ("bits", "values"):
            seq = getattr(self, name)
            if seq is not None:
                seq = tuple(seq)
                object.__setattr__(self, name, seq)
                if len(seq) != size:
                    raise ValueError(f"{name} has {len(seq)} elements, shape {self.shape} needs {size}")

    @classmethod
    def from_values(cls, values, fmt: FpFormat | str, shape: Sequence[int] | None = None) -> Tensor:
        """Quantize (truncate) ``values`` into ``fmt``, keeping them as the shadow."""
        fmt = get_format(fmt)
        arr = np.asarray(values, dtype=object)
        if shape is None:
            shape = arr.shape
        flat = tuple(arr.reshape(-1).tolist())
        return cls(tuple(shape), fmt, tuple(encode(v, fmt).bits for v in flat), flat)

    @classmethod
    def from_bits(cls, bits, fmt: FpFormat | str, shape: Sequence[int]) -> Tensor:
        return cls(tuple(shape), get_format(fmt), tuple(int(b) for b in bits))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def elements(self) -> list[FpBits]:
        return [FpBits(self.format, b) for b in self._bits()]

    def _bits(self) -> tuple[int, ...]:
        if self.bits is None:
            return tuple(encode(v, self.format).bits for v in self.values)
        return self.bits

    def exact_values(self) -> list[Fraction]:
        """Shadow as exact rationals when present, else the decoded patterns."""
        if self.values is not None:
            return [Fraction(v) for v in self.values]
        return [decode(FpBits(self.format, b)).value for b in self.bits]

    def quantized_values(self) -> list[Fraction]:
        """Values of the stored bit patterns, ignoring the shadow."""
        return [decode(FpBits(self.format, b)).value for b in self._bits()]

    def to_numpy(self) -> np.ndarray:
        return np.array([float(v) for v in self.exact_values()], dtype=np.float64).reshape(self.shape)

    def to_json(self) -> str:
        doc = {"shape": list(self.shape), "format": self.format.name,
               "hex": [f"{b:0{self.format.hex_digits}x}" for b in self._bits()]}
        if self.values is not None:
            doc["values"] = [_decimal_str(v) for v in self.values]
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> Tensor:
        doc = json.loads(text)
        fmt = get_format(doc["format"])
        bits = tuple(int(h, 16) for h in doc["hex"])
        values = tuple(Fraction(s) for s in doc["values"]) if "values" in doc else None
        return cls(tuple(doc["shape"]), fmt, bits, values)


def _decimal_str(v) -> str:
    """Exact decimal string for a dyadic rational or float."""
    f = Fraction(v)
    den = f.denominator
    twos = den.bit_length() - 1
    if den != 1 << twos:
        raise ValueError(f"{v!r} is not dyadic")
    text = str(abs(f.numerator) * 5**twos).rjust(twos + 1, "0")
    whole, frac = text[:len(text) - twos], text[len(text) - twos:].rstrip("0")
    sign = "-" if f < 0 else ""
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def _check_same_format(a: Tensor, b: Tensor):
    if a.format != b.format:
        raise ValueError(f"format mismatch: {a.format.name} vs {b.format.name}")


def _check_matmul(a: Tensor, b: Tensor):
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ValueError("matmul needs 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")


def transpose(t: Tensor) -> Tensor:
    if len(t.shape) != 2:
        raise ValueError("transpose needs a 2-D tensor")
    r, c = t.shape
    idx = [i * c + j for j in range(c) for i in range(r)]
    bits = None if t.bits is None else tuple(t.bits[i] for i in idx)
    values = None if t.values is None else tuple(t.values[i] for i in idx)
    return Tensor((c, r), t.format, bits, values)


def truncate_tensor(t: Tensor, k: int) -> Tensor:
    """Keep the top ``k`` mantissa bits of every element; the shadow is dropped."""
    return Tensor(t.shape, t.format, tuple(truncate_mantissa(e, k).bits for e in t.elements()))


def elementwise_lmul(a: Tensor, x: Tensor, rule: OffsetRule = PIECEWISE_RULE,
                     policy: SpecialPolicy = DEFAULT_POLICY, *, precision: int | None = None) -> Tensor:
    if a.shape != x.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {x.shape}")
    _check_same_format(a, x)
    out = tuple(lmul_bits(p, q, rule, policy, precision=precision).bits
                for p, q in zip(a.elements(), x.elements()))
    return Tensor(a.shape, a.format, out)


def _accumulate(terms: list[Fraction], accum: AccumPolicy) -> Fraction | float:
    if accum is AccumPolicy.EXACT:
        return sum(terms, Fraction(0))
    if accum is AccumPolicy.WIDE_FLOAT:
        acc = 0.0
        for t in terms:
            acc += float(t)
        return acc
    acc = Fraction(0)
    for t in terms:
        acc = decode(encode(acc + t, FP8_E4M3)).value
    return acc


def lmatmul(a: Tensor, b: Tensor, rule: OffsetRule = PIECEWISE_RULE,
            policy: SpecialPolicy = DEFAULT_POLICY, accum: AccumPolicy = AccumPolicy.EXACT,
            *, precision: int | None = None) -> Tensor:
    """Matrix product whose every scalar product is :func:`lmul_bits`.

    Under ``AccumPolicy.EXACT`` the result is shadow-only (exact sums); the
    other policies re-encode each sum into the operand format.
    """
    _check_matmul(a, b)
    _check_same_format(a, b)
    n, kdim = a.shape
    p = b.shape[1]
    ea, eb = a.elements(), b.elements()
    fmt = a.format
    out = []
    for i in range(n):
        row = ea[i * kdim:(i + 1) * kdim]
        for j in range(p):
            terms = [decode(lmul_bits(row[t], eb[t * p + j], rule, policy, precision=precision)).value
                     for t in range(kdim)]
            out.append(_accumulate(terms, accum))
    if accum is AccumPolicy.EXACT:
        return Tensor((n, p), fmt, values=tuple(out))
    return Tensor((n, p), fmt, tuple(encode(v, fmt).bits for v in out), tuple(out))


def exact_matmul(a: Tensor, b: Tensor) -> Tensor:
    """Exact product of the tensors' exact values (shadow if present)."""
    _check_matmul(a, b)
    n, kdim = a.shape
    p = b.shape[1]
    va, vb = a.exact_values(), b.exact_values()
    out = [sum((va[i * kdim + t] * vb[t * p + j] for t in range(kdim)), Fraction(0))
           for i in range(n) for j in range(p)]
    return Tensor((n, p), a.format, values=tuple(out))


def _softmax(m: np.ndarray) -> np.ndarray:
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(m: Tensor) -> Tensor:
    if len(m.shape) != 2:
        raise ValueError("softmax_rows needs a 2-D tensor")
    out = _softmax(m.to_numpy())
    return Tensor(m.shape, m.format, values=tuple(out.reshape(-1).tolist()))


@dataclass(frozen=True)
class Exact:
    """Reference attention with exact projections and binary64 score/output products."""


@dataclass(frozen=True)
class LMulAttention:
    """Score product ``Q K^T`` via L-Matmul on operands truncated to ``k`` bits.

    With ``lmul_values`` the post-softmax product also runs through L-Matmul
    (``A`` and ``V`` truncated to ``k`` bits); by default it is exact.
    """

    k: int
    rule: OffsetRule = PIECEWISE_RULE
    lmul_values: bool = False


def attention_forward(h: Tensor, wq: Tensor, wk: Tensor, wv: Tensor,
                      mode: Exact | LMulAttention = Exact(), literal_eq3: bool = False) -> Tensor:
    """Single-head attention ``softmax(Q K^T / sqrt(d)) V``.

    ``literal_eq3`` multiplies the attention weights by ``H`` instead of
    ``V``.  Returns a shadow-only binary64 tensor in ``h``'s format.
    """
    if len(h.shape) != 2:
        raise ValueError("H must be seq x d")
    seq, d = h.shape
    for w in (wq, wk, wv):
        if w.shape != (d, d):
            raise ValueError(f"projection shape {w.shape} != {(d, d)}")
    q = exact_matmul(h, wq)
    k = exact_matmul(h, wk)
    v = exact_matmul(h, wv)
    rhs = h if literal_eq3 else v
    fmt = h.format

    if isinstance(mode, Exact):
        scores = exact_matmul(q, transpose(k)).to_numpy()
        attn = _softmax(scores / math.sqrt(d))
        out = attn @ rhs.to_numpy()
    else:
        if not 1 <= mode.k <= fmt.man_bits:
            raise ValueError(f"k={mode.k} outside 1..{fmt.man_bits}")
        qk = truncate_tensor(Tensor.from_values(q.values, fmt, q.shape), mode.k)
        kk = truncate_tensor(Tensor.from_values(k.values, fmt, k.shape), mode.k)
        scores = lmatmul(qk, transpose(kk), mode.rule, precision=mode.k).to_numpy()
        attn = _softmax(scores / math.sqrt(d))
        if mode.lmul_values:
            ak = truncate_tensor(Tensor.from_values(attn.reshape(-1).tolist(), fmt, attn.shape), mode.k)
            vk = truncate_tensor(Tensor.from_values(rhs.exact_values(), fmt, rhs.shape), mode.k)
            out = lmatmul(ak, vk, mode.rule, precision=mode.k).to_numpy()
        else:
            out = attn @ rhs.to_numpy()
    return Tensor(out.shape, fmt, values=tuple(out.reshape(-1).tolist()))


@dataclass(frozen=True)
class ErrorMetrics:
    mse: float
    mean_err: float
    max_rel_err: float
    cosine: float | None

    @property
    def cosine_defined(self) -> bool:
        return self.cosine is not None

    def as_dict(self) -> dict:
        return {"mse": self.mse, "mean_err": self.mean_err,
                "max_rel_err": self.max_rel_err, "cosine": self.cosine}


def error_metrics(y: Tensor, yref: Tensor) -> ErrorMetrics:
    """Errors of ``y`` against ``yref`` (signed error is ``yref - y``).

    Relative error at a zero reference is 0 when ``y`` is also zero, else inf.
    ``cosine`` is None when either tensor has zero norm.
    """
    if y.shape != yref.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {yref.shape}")
    a = y.to_numpy().reshape(-1)
    r = yref.to_numpy().reshape(-1)
    diff = r - a
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(r != 0, np.abs(diff) / np.abs(r), np.where(diff == 0, 0.0, np.inf))
    na, nr = np.linalg.norm(a), np.linalg.norm(r)
    cosine = float(a @ r / (na * nr)) if na > 0 and nr > 0 else None
    return ErrorMetrics(float(np.mean(diff**2)), float(np.mean(diff)),
                        float(rel.max()) if rel.size else 0.0, cosine)


def random_attention_inputs(seq: int, d: int, fmt: FpFormat | str, seed: int) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """H (seq x d) then Wq, Wk, Wv (d x d), uniform in [-1, 1), drawn in that order."""
    from .prng import Xorshift64Star

    if seq < 1 or d < 1:
        raise ValueError("seq and d must be >= 1")
    fmt = get_format(fmt)
    rng = Xorshift64Star(seed)
    out = []
    for shape in ((seq, d), (d, d), (d, d), (d, d)):
        u = rng.uniform(math.prod(shape)) * 2.0 - 1.0
        out.append(Tensor.from_values(u.tolist(), fmt, shape))
    return tuple(out)
