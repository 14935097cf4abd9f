"""Gate-count and energy model for L-Mul versus a conventional FP multiplier.

A full adder is 2 AND + 2 XOR + 1 OR with each XOR built from 4 NAND, so 11
gates; a half adder is 1 AND + 1 XOR, so 5.  An n-bit ripple adder is one
half adder plus n-1 full adders.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable

from .fpcodec import FORMATS, FpFormat

__all__ = [
    "GateModel",
    "GATES",
    "WidthRule",
    "CostReport",
    "ENERGY_PJ",
    "REFERENCE_MUL_TOTALS",
    "DERIVED_RATIOS",
    "adder_gates",
    "lmul_gates",
    "fpmul_gates",
    "energy",
    "energy_ratio",
    "derived_ratios",
    "reports_to_csv",
]


@dataclass(frozen=True)
class GateModel:
    full_adder_gates: int = 11
    half_adder_gates: int = 5
    xor_gates: int = 4
    and_gates: int = 1


GATES = GateModel()


class WidthRule(enum.Enum):
    EXACT_FIELD = "exact_field"
    ROUND_UP_16 = "round_up_16"


# Published multiplier totals; the literal component counts fall short of them.
REFERENCE_MUL_TOTALS = {"fp16": 584, "fp8_e4m3": 325, "fp8_e5m2": 296}

OFFSET_ADDER_BITS = 8


@dataclass(frozen=True)
class CostReport:
    format: str
    op: str
    components: dict[str, int] = field(default_factory=dict)
    reference_total: int | None = None

    @property
    def total(self) -> int:
        return sum(self.components.values())

    @property
    def gap(self) -> int | None:
        return None if self.reference_total is None else self.reference_total - self.total

    def as_dict(self) -> dict:
        return {"format": self.format, "op": self.op, "components": dict(self.components),
                "total": self.total, "reference_total": self.reference_total, "gap": self.gap}


def adder_gates(n: int, model: GateModel = GATES) -> int:
    if n < 1:
        raise ValueError(f"adder width must be >= 1, got {n}")
    return model.half_adder_gates + model.full_adder_gates * (n - 1)


def default_width_rule(fmt: FpFormat) -> WidthRule:
    # 16-bit words use a full 16-bit adder; narrower formats use the exact field width
    return WidthRule.ROUND_UP_16 if fmt.width == 16 else WidthRule.EXACT_FIELD


def lmul_gates(fmt: FpFormat, width_rule: WidthRule | None = None, model: GateModel = GATES) -> CostReport:
    rule = width_rule or default_width_rule(fmt)
    width = fmt.field_bits
    if rule is WidthRule.ROUND_UP_16:
        width = -(-width // 16) * 16
    return CostReport(fmt.name, "lmul", {
        "sign_xor": model.xor_gates,
        "field_adder": adder_gates(width, model),
        "offset_adder": adder_gates(OFFSET_ADDER_BITS, model),
    })


def fpmul_gates(fmt: FpFormat, model: GateModel = GATES) -> CostReport:
    """Component sum for a ``1+i+j`` bit multiplier, with the published total attached."""
    i, j = fmt.exp_bits, fmt.man_bits
    return CostReport(fmt.name, "mul", {
        "sign_xor": model.xor_gates,
        "exponent_adder": adder_gates(i, model),
        "exponent_offset_adder": adder_gates(OFFSET_ADDER_BITS, model),
        "mantissa_and": (j + 1) ** 2 * model.and_gates,
        "mantissa_half_adders": 3 * model.half_adder_gates,
        "mantissa_full_adders": (2 * j - 2) * model.full_adder_gates,
        "rounding_half_adders": i * model.half_adder_gates,
    }, REFERENCE_MUL_TOTALS.get(fmt.name))


def all_reports(formats: Iterable[FpFormat] = FORMATS.values()) -> list[CostReport]:
    out = []
    for fmt in formats:
        out.append(lmul_gates(fmt))
        out.append(fpmul_gates(fmt))
    return out


def reports_to_csv(reports: Iterable[CostReport]) -> str:
    """Long format ``format,op,component,gates`` plus ``total``/``reference_total`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["format", "op", "component", "gates"])
    for r in reports:
        for name, g in r.components.items():
            w.writerow([r.format, r.op, name, g])
        w.writerow([r.format, r.op, "total", r.total])
        if r.reference_total is not None:
            w.writerow([r.format, r.op, "reference_total", r.reference_total])
    return buf.getvalue()


def reports_to_json(reports: Iterable[CostReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2) + "\n"


# Energy per operation in pJ (45 nm).  int16 add is not in the table proper.
ENERGY_PJ: dict[str, Decimal] = {
    "int8_add": Decimal("0.03"),
    "int16_add": Decimal("0.05"),
    "int32_add": Decimal("0.1"),
    "fp16_add": Decimal("0.4"),
    "fp32_add": Decimal("0.9"),
    "int8_mul": Decimal("0.2"),
    "int32_mul": Decimal("3.1"),
    "fp16_mul": Decimal("1.1"),
    "fp32_mul": Decimal("3.7"),
}


def energy(ops: str | Iterable[str], table: dict[str, Decimal] = ENERGY_PJ) -> Decimal:
    keys = [ops] if isinstance(ops, str) else list(ops)
    try:
        return sum((table[k] for k in keys), Decimal(0))
    except KeyError as e:
        raise ValueError(f"unknown operation {e.args[0]!r}; known: {', '.join(table)}") from None


def energy_ratio(op_a: str | Iterable[str], op_b: str | Iterable[str],
                 table: dict[str, Decimal] = ENERGY_PJ) -> Fraction:
    """``energy(op_a) / energy(op_b)``; a sequence of keys means their summed cost."""
    return Fraction(energy(op_a, table)) / Fraction(energy(op_b, table))


# name -> (numerator ops, denominator ops, report 1 - ratio)
DERIVED_RATIOS: dict[str, tuple[tuple[str, ...], tuple[str, ...], bool]] = {
    "int32_add_vs_fp32_mul": (("int32_add",), ("fp32_mul",), False),
    "int16_add_vs_fp16_mul": (("int16_add",), ("fp16_mul",), False),
    "fp32_mul_add_swap": (("int32_add", "fp32_add"), ("fp32_mul", "fp32_add"), False),
    "fp16_pipeline_saving": (("int16_add", "fp16_add"), ("fp16_mul", "fp16_add"), True),
}


def derived_ratios(table: dict[str, Decimal] = ENERGY_PJ) -> dict[str, Fraction]:
    out = {}
    for name, (num, den, complement) in DERIVED_RATIOS.items():
        r = energy_ratio(num, den, table)
        out[name] = 1 - r if complement else r
    return out


def percent(r: Fraction, digits: int = 1) -> str:
    return f"{float(r) * 100:.{digits}f}%"
