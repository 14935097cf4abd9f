"""Error expectations of truncated multiplication and L-Mul, analytic and sampled.

Operands are ``x = (1 + x_k + x_r) * 2**x_e`` where ``x_k`` is the value of
the top ``k`` mantissa bits and ``x_r`` the rest.  All errors are signed
``exact(x, y) - approx(x', y')`` where ``x', y'`` keep ``k`` bits, and are
normalized by ``2**(x_e + y_e)``.

Sampling is exact: mantissa fields are integers, so every per-sample error is
an integer in units of ``2**-(2m)`` and sums never round.  That makes reports
independent of how samples are split across workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fpcodec import FpBits, FpClass, FpFormat, classify, encode
from .lmul import OffsetRule, offset_exponent
from .prng import Xorshift64Star

__all__ = [
    "InputError",
    "EvenMantissa",
    "Empirical",
    "ExpectationReport",
    "ModeResult",
    "McErrorReport",
    "SweepCell",
    "SweepResult",
    "MODES",
    "expected_xk",
    "expected_xr",
    "f1_even",
    "f2_even",
    "even_report",
    "table_a1_even",
    "expectations",
    "mc_error",
    "lk_sweep",
    "load_histogram",
    "TABLE_A1_RULE",
]

MODES = ("lmul_eq1", "lmul_semantics", "rounded")

# Constant l = 4 is the offset that reproduces the published even-distribution row.
TABLE_A1_RULE = OffsetRule(4)


class InputError(ValueError):
    """Malformed user data (histogram files and the like)."""


@dataclass(frozen=True)
class EvenMantissa:
    """Mantissa fields uniform over ``0 .. 2**man_bits - 1``; positive sign.

    ``exponent`` is a fixed unbiased exponent or an inclusive ``(lo, hi)``
    range drawn uniformly.
    """

    man_bits: int
    exponent: int | tuple[int, int] = 0

    def __post_init__(self):
        if self.man_bits < 1:
            raise ValueError("man_bits must be >= 1")
        lo, hi = self.exp_range
        if lo > hi:
            raise ValueError(f"empty exponent range {self.exponent}")

    @property
    def exp_range(self) -> tuple[int, int]:
        if isinstance(self.exponent, int):
            return self.exponent, self.exponent
        lo, hi = self.exponent
        return int(lo), int(hi)

    def describe(self) -> str:
        lo, hi = self.exp_range
        exp = str(lo) if lo == hi else f"{lo}..{hi}"
        return f"even(m={self.man_bits}, exp={exp})"


@dataclass(frozen=True)
class Empirical:
    """Weighted sample of operand values; magnitudes are used, signs ignored."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.values:
            raise InputError("empirical distribution is empty")
        if len(self.values) != len(self.weights):
            raise InputError("values and weights differ in length")
        for v, w in zip(self.values, self.weights):
            if not math.isfinite(v):
                raise InputError(f"non-finite value {v!r}")
            if not (math.isfinite(w) and w > 0):
                raise InputError(f"weight must be positive and finite, got {w!r}")

    def describe(self) -> str:
        return f"empirical({len(self.values)} points)"

    def operand_fields(self, fmt: FpFormat) -> tuple[np.ndarray, np.ndarray]:
        """Mantissa fields and unbiased exponents of each point encoded in ``fmt``."""
        mans, exps = [], []
        for v in self.values:
            b = encode(abs(v), fmt)
            if classify(b) is not FpClass.NORMAL:
                raise InputError(f"value {v!r} is not a normal {fmt.name} number")
            mans.append(b.man_field)
            exps.append(b.exp_field - fmt.bias)
        return np.array(mans, dtype=np.int64), np.array(exps, dtype=np.int64)


Distribution = EvenMantissa | Empirical


# --- closed forms -----------------------------------------------------------

def _check_km(m: int, k: int):
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")


def expected_xk(k: int) -> Fraction:
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return Fraction(1, 2) * (1 - Fraction(1, 1 << k))


def expected_xr(m: int, k: int) -> Fraction:
    _check_km(m, k)
    return Fraction(1, 2) * (Fraction(1, 1 << k) - Fraction(1, 1 << m))


def _f1(exk: Fraction, exr: Fraction) -> Fraction:
    # E[x_k y_r + y_k x_r + x_r + y_r + x_r y_r] for iid operands
    return 2 * exk * exr + 2 * exr + exr * exr


def _f2(exk: Fraction, l: int) -> Fraction:
    return exk * exk - Fraction(1, 1 << l)


def f1_even(m: int, k: int) -> Fraction:
    return _f1(expected_xk(k), expected_xr(m, k))


def f2_even(k: int, l: int) -> Fraction:
    if l < 0:
        raise ValueError(f"need l >= 0, got {l}")
    return _f2(expected_xk(k), l)


@dataclass(frozen=True)
class ExpectationReport:
    m: int
    k: int
    l: int
    e_xk: Fraction
    e_xr: Fraction
    f1: Fraction
    f2: Fraction
    exp_scale: Fraction = Fraction(1)

    @property
    def total(self) -> Fraction:
        return self.f1 + self.f2

    def as_dict(self) -> dict:
        return {"m": self.m, "k": self.k, "l": self.l,
                "e_xk": float(self.e_xk), "e_xr": float(self.e_xr),
                "f1": float(self.f1), "f2": float(self.f2), "total": float(self.total),
                "abs_f1": float(abs(self.f1)), "abs_total": float(abs(self.total)),
                "exp_scale": float(self.exp_scale)}


def _exp_scale_even(dist: EvenMantissa) -> Fraction:
    lo, hi = dist.exp_range
    mean = sum((Fraction(2) ** e for e in range(lo, hi + 1)), Fraction(0)) / (hi - lo + 1)
    return mean * mean


def even_report(m: int, k: int, rule: OffsetRule = TABLE_A1_RULE,
                exp_scale: Fraction = Fraction(1)) -> ExpectationReport:
    l = offset_exponent(k, rule)
    exk, exr = expected_xk(k), expected_xr(m, k)
    return ExpectationReport(m, k, l, exk, exr, _f1(exk, exr), _f2(exk, l), exp_scale)


def table_a1_even(m: int = 7, rule: OffsetRule = TABLE_A1_RULE,
                  ks: Iterable[int] = range(1, 7)) -> list[ExpectationReport]:
    """Even-distribution error expectations for each ``k``; rows read ``|f1|, |f1+f2|``."""
    return [even_report(m, k, rule) for k in ks]


def expectations(dist: Distribution, fmt: FpFormat, k: int,
                 rule: OffsetRule = TABLE_A1_RULE) -> ExpectationReport:
    """Analytic expectations under ``dist`` (closed forms for the even case)."""
    if isinstance(dist, EvenMantissa):
        _check_km(dist.man_bits, k)
        return even_report(dist.man_bits, k, rule, _exp_scale_even(dist))
    m = fmt.man_bits
    _check_km(m, k)
    mans, exps = dist.operand_fields(fmt)
    w = [Fraction(x) for x in dist.weights]
    total_w = sum(w)
    drop = m - k
    xk = [Fraction(int(a) >> drop << drop, 1 << m) for a in mans]
    xr = [Fraction(int(a) & ((1 << drop) - 1), 1 << m) for a in mans]
    exk = sum(wi * v for wi, v in zip(w, xk)) / total_w
    exr = sum(wi * v for wi, v in zip(w, xr)) / total_w
    e2 = sum(wi * Fraction(2) ** int(e) for wi, e in zip(w, exps)) / total_w
    l = offset_exponent(k, rule)
    return ExpectationReport(m, k, l, exk, exr, _f1(exk, exr), _f2(exk, l), e2 * e2)


# --- sampling ---------------------------------------------------------------

def _full_bits(dist: Distribution, fmt: FpFormat) -> int:
    if isinstance(dist, EvenMantissa):
        if dist.man_bits > fmt.man_bits:
            raise ValueError(f"distribution has {dist.man_bits} mantissa bits, {fmt.name} only {fmt.man_bits}")
        return dist.man_bits
    return fmt.man_bits


def draw_operands(dist: Distribution, fmt: FpFormat, n: int, seed: int):
    """Draw ``n`` iid operand pairs; sample ``i`` uses stream outputs ``2i`` and ``2i+1``.

    Returns ``(xm, xe, ym, ye)`` int64 arrays of mantissa fields and exponents.
    Even case: mantissa = top ``m`` bits of the output, exponent offset =
    low 32 bits mod span.  Empirical case: inverse CDF on the top 53 bits.
    """
    words = Xorshift64Star(seed).fill(2 * n)
    if isinstance(dist, EvenMantissa):
        m = dist.man_bits
        lo, hi = dist.exp_range
        mans = (words >> np.uint64(64 - m)).astype(np.int64)
        exps = lo + ((words & np.uint64(0xFFFFFFFF)) % np.uint64(hi - lo + 1)).astype(np.int64)
    else:
        pm, pe = dist.operand_fields(fmt)
        cw = np.cumsum(np.asarray(dist.weights, dtype=np.float64))
        u = (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53)) * cw[-1]
        idx = np.minimum(np.searchsorted(cw, u, side="right"), len(cw) - 1)
        mans, exps = pm[idx], pe[idx]
    return mans[0::2], exps[0::2], mans[1::2], exps[1::2]


def _mode_errors(mode: str, xm, ym, m: int, k: int, l: int) -> np.ndarray:
    """Signed normalized errors in units of ``2**-(2m)``."""
    if l > 2 * m:
        raise ValueError(f"l={l} exceeds sampling resolution 2m={2 * m}")
    one = 1 << m
    drop = m - k
    xk = (xm >> drop) << drop
    yk = (ym >> drop) << drop
    exact = (one + xm) * (one + ym)
    if mode == "rounded":
        approx = (one + xk) * (one + yk)
    elif mode == "lmul_eq1":
        approx = one * one + (xk + yk) * one + (1 << (2 * m - l))
    elif mode == "lmul_semantics":
        s = (xk + yk) * one + (1 << (2 * m - l))
        carry = s >> (2 * m)
        approx = (one * one + s - (carry << (2 * m))) << carry
    else:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    return exact - approx


def _exact_sum(a: np.ndarray, square: bool = False) -> int:
    if a.size == 0:
        return 0
    peak = int(np.abs(a).max())
    if square and peak >= 1 << 31:
        vals = a.astype(object)
        return int(np.sum(vals * vals))
    # chunk so no int64 partial sum can overflow
    bound = peak * peak if square else peak
    chunk = max(1, (1 << 62) // (bound + 1))
    if square:
        return sum(int(np.sum(a[i:i + chunk] * a[i:i + chunk])) for i in range(0, a.size, chunk))
    return sum(int(np.sum(a[i:i + chunk])) for i in range(0, a.size, chunk))


def _partial_sums(err: np.ndarray, tsum: np.ndarray) -> dict[int, tuple[int, int, int]]:
    """Per exponent-sum group: (count, sum, sum of squares), exact."""
    out = {}
    for t in np.unique(tsum).tolist():
        sel = err[tsum == t]
        out[t] = (int(sel.size), _exact_sum(sel), _exact_sum(sel, square=True))
    return out


def _merge(parts: list[dict]) -> dict[int, tuple[int, int, int]]:
    acc: dict[int, list[int]] = {}
    for p in parts:
        for t, (c, s, q) in p.items():
            slot = acc.setdefault(t, [0, 0, 0])
            slot[0] += c
            slot[1] += s
            slot[2] += q
    return {t: tuple(v) for t, v in sorted(acc.items())}


@dataclass(frozen=True)
class ModeResult:
    mode: str
    k: int
    l: int | None
    mean_err: Fraction
    mse: Fraction
    stderr: float
    raw_mean_err: Fraction
    raw_mse: Fraction

    @property
    def key(self) -> str:
        return f"{self.mode}(k={self.k})" if self.l is None else f"{self.mode}(k={self.k},l={self.l})"

    def as_dict(self) -> dict:
        return {"mode": self.mode, "k": self.k, "l": self.l,
                "mean_err": float(self.mean_err), "mse": float(self.mse), "stderr": self.stderr,
                "raw_mean_err": float(self.raw_mean_err), "raw_mse": float(self.raw_mse)}


@dataclass(frozen=True)
class McErrorReport:
    n_samples: int
    seed: int
    distribution: str
    format: str
    results: dict[str, ModeResult] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"n_samples": self.n_samples, "seed": self.seed,
                "distribution": self.distribution, "format": self.format,
                "results": {k: v.as_dict() for k, v in self.results.items()}}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def _summarize(mode: str, k: int, l: int | None, m: int, groups: dict, n: int) -> ModeResult:
    unit = Fraction(1, 1 << (2 * m))
    s = sum(g[1] for g in groups.values())
    q = sum(g[2] for g in groups.values())
    raw_s = sum((Fraction(2) ** t) * g[1] for t, g in groups.items())
    raw_q = sum((Fraction(4) ** t) * g[2] for t, g in groups.items())
    mean = Fraction(s, n) * unit
    mse = Fraction(q, n) * unit * unit
    if n > 1:
        var = Fraction(q * n - s * s, n * (n - 1)) * unit * unit
        stderr = math.sqrt(var / n)
    else:
        stderr = 0.0
    return ModeResult(mode, k, l, mean, mse, stderr,
                      Fraction(raw_s, n) * unit, Fraction(raw_q, n) * unit * unit)


def _grouped(mode, xm, ym, tsum, m, k, l, workers: int) -> dict:
    def part(w: int) -> dict:
        sl = slice(w, None, workers)
        return _partial_sums(_mode_errors(mode, xm[sl], ym[sl], m, k, l), tsum[sl])

    if workers == 1:
        return _merge([part(0)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return _merge(list(pool.map(part, range(workers))))


def mc_error(dist: Distribution, fmt: FpFormat, k: int, rule: OffsetRule,
             modes: Sequence[str] = MODES, n: int = 100_000, seed: int = 0,
             workers: int = 1) -> McErrorReport:
    """Monte Carlo estimate of normalized error for each mode.

    ``rounded`` is exact multiplication of the ``k``-bit operands; the two
    L-Mul modes use ``l = rule(k)``.  Worker ``w`` handles sample indices
    ``i % workers == w``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    m = _full_bits(dist, fmt)
    _check_km(m, k)
    xm, xe, ym, ye = draw_operands(dist, fmt, n, seed)
    tsum = xe + ye
    l = offset_exponent(k, rule)
    results = {}
    for mode in modes:
        ml = None if mode == "rounded" else l
        groups = _grouped(mode, xm, ym, tsum, m, k, ml or 0, workers)
        r = _summarize(mode, k, ml, m, groups, n)
        results[r.key] = r
    return McErrorReport(n, seed, dist.describe(), fmt.name, results)


@dataclass(frozen=True)
class SweepCell:
    k: int
    l: int
    mse: float
    mean_err: float


@dataclass(frozen=True)
class SweepResult:
    n_samples: int
    seed: int
    mode: str
    cells: list[SweepCell]
    baseline_e4m3: float
    baseline_e5m2: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "l", "mse", "mean_err", "baseline_e4m3", "baseline_e5m2"])
        for c in self.cells:
            w.writerow([c.k, c.l, repr(c.mse), repr(c.mean_err),
                        repr(self.baseline_e4m3), repr(self.baseline_e5m2)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"n_samples": self.n_samples, "seed": self.seed, "mode": self.mode,
               "baseline_e4m3": self.baseline_e4m3, "baseline_e5m2": self.baseline_e5m2,
               "cells": [asdict(c) for c in self.cells]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def row(self, k: int) -> list[SweepCell]:
        return [c for c in self.cells if c.k == k]


def lk_sweep(dist: Distribution, fmt: FpFormat, k_range: Iterable[int],
             l_range: Iterable[int] | OffsetRule, n: int, seed: int,
             mode: str = "lmul_semantics", workers: int = 1) -> SweepResult:
    """MSE for every ``(k, l)`` cell on one shared set of draws.

    ``l_range`` may be an :class:`OffsetRule`, giving one cell per ``k`` at
    ``l = rule(k)``.  Baselines are exact multiplication of 3-bit (e4m3) and
    2-bit (e5m2) mantissas.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ks = list(k_range)
    if not ks:
        raise ValueError("empty k range")
    if isinstance(l_range, OffsetRule):
        pairs = [(k, offset_exponent(k, l_range)) for k in ks]
    else:
        ls = list(l_range)
        if not ls:
            raise ValueError("empty l range")
        pairs = [(k, l) for k in ks for l in ls]
    m = _full_bits(dist, fmt)
    if m < 3:
        raise ValueError("sweep baselines need at least 3 mantissa bits")
    for k, _ in pairs:
        _check_km(m, k)
    xm, xe, ym, ye = draw_operands(dist, fmt, n, seed)
    tsum = xe + ye

    def cell(mode_, k, l):
        return _summarize(mode_, k, l, m, _grouped(mode_, xm, ym, tsum, m, k, l, workers), n)

    cells = []
    for k, l in pairs:
        r = cell(mode, k, l)
        cells.append(SweepCell(k, l, float(r.mse), float(r.mean_err)))
    e4m3 = float(cell("rounded", 3, 0).mse)
    e5m2 = float(cell("rounded", 2, 0).mse)
    return SweepResult(n, seed, mode, cells, e4m3, e5m2)


# --- user histograms --------------------------------------------------------

def load_histogram(path: str | Path) -> Empirical:
    """Read ``value,weight`` lines; blank lines and ``#`` comments are skipped."""
    values, weights = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'value,weight', got {text!r}")
            try:
                v, w = float(parts[0]), float(parts[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: not a number in {text!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}:{lineno}: non-finite value")
            if not (math.isfinite(w) and w > 0):
                raise InputError(f"{path}:{lineno}: weight must be positive, got {parts[1]}")
            values.append(v)
            weights.append(w)
    if not values:
        raise InputError(f"{path}: no data lines")
    return Empirical(tuple(values), tuple(weights))
