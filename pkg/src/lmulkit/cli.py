"""Command-line entry point.

Examples:
  lmulkit verify --dtype fp8_e4m3
  lmulkit table-a1 --format json
  lmulkit error-sweep --dtype bf16 --k 1-7 --l 1-7 --n 100000 --seed 1 --out sweep.csv
  lmulkit attention-demo --seq 8 --d 16 --k 3-7 --seed 0

Exit status: 0 success, 1 check failure, 2 argument error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    TABLE_A1_RULE,
    EvenMantissa,
    InputError,
    expectations,
    lk_sweep,
    load_histogram,
    table_a1_even,
)
from .fpcodec import FORMATS, get_format
from .gatecost import ENERGY_PJ, all_reports, derived_ratios, percent, reports_to_csv, reports_to_json
from .lmul import PIECEWISE_RULE, OffsetRule, offset_exponent
from .tensor import Exact, LMulAttention, attention_forward, error_metrics, random_attention_inputs
from .verify import verify_exhaustive

EXIT_OK, EXIT_CHECK, EXIT_ARGS = 0, 1, 2


class ArgError(ValueError):
    pass


def parse_int_range(text: str) -> list[int]:
    """``"3"``, ``"3-7"``, ``"3..7"`` or ``"1,2,5"`` (inclusive)."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            sep = ".." if ".." in part else ("-" if "-" in part[1:] else None)
            if sep:
                lo, hi = part.split(sep, 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ArgError(f"bad integer range {text!r}") from None
    if not out:
        raise ArgError(f"empty range {text!r}")
    return out


def parse_distribution(text: str, fmt):
    """``even``, ``even:E``, ``even:LO..HI`` or ``hist:PATH``."""
    kind, _, arg = text.partition(":")
    if kind == "even":
        if not arg:
            return EvenMantissa(fmt.man_bits, 0)
        if ".." in arg:
            lo, hi = arg.split("..", 1)
            return EvenMantissa(fmt.man_bits, (int(lo), int(hi)))
        return EvenMantissa(fmt.man_bits, int(arg))
    if kind == "hist" and arg:
        return load_histogram(arg)
    raise ArgError(f"bad distribution {text!r}; use even[:EXP|:LO..HI] or hist:PATH")


def _rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    fmt = get_format(args.dtype)
    try:
        report = verify_exhaustive(fmt, PIECEWISE_RULE, offset_delta=args.corrupt_offset)
    except ValueError as e:
        raise ArgError(str(e)) from None
    if args.out:
        _emit(args, report.to_json() if args.format == "json" else report.to_csv())
    print(report.summary())
    for x, y in report.mismatches[:20]:
        print(f"  mismatch x={x} y={y}")
    if len(report.mismatches) > 20:
        print(f"  ... {len(report.mismatches) - 20} more")
    return EXIT_OK if report.ok else EXIT_CHECK


def cmd_table_a1(args) -> int:
    rule = OffsetRule.parse(args.l_rule)
    rows = table_a1_even(7, rule)
    if args.format == "json":
        _emit(args, json.dumps({"m": 7, "l_rule": str(rule), "rows": [r.as_dict() for r in rows]},
                               indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, _rows_to_csv(["k", "l", "abs_f1", "abs_f1_plus_f2"],
                                 [[r.k, r.l, _num(abs(r.f1)), _num(abs(r.total))] for r in rows]))
    return EXIT_OK


def cmd_error_sweep(args) -> int:
    if args.n < 1:
        raise ArgError(f"--n must be >= 1, got {args.n}")
    fmt = get_format(args.dtype)
    dist = parse_distribution(args.dist, fmt)
    ks = parse_int_range(args.k)
    l_range = OffsetRule.parse("eq1") if args.l == "eq1" else parse_int_range(args.l)
    result = lk_sweep(dist, fmt, ks, l_range, args.n, args.seed, workers=args.workers)
    _emit(args, result.to_json() if args.format == "json" else result.to_csv())
    return EXIT_OK


def cmd_gates(args) -> int:
    reports = all_reports()
    _emit(args, reports_to_json(reports) if args.format == "json" else reports_to_csv(reports))
    return EXIT_OK


def cmd_energy(args) -> int:
    ratios = derived_ratios()
    if args.format == "json":
        doc = {"energy_pj": {k: str(v) for k, v in ENERGY_PJ.items()},
               "ratios": {k: {"value": float(v), "percent": percent(v)} for k, v in ratios.items()}}
        _emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        rows = [["energy_pj", k, str(v), ""] for k, v in ENERGY_PJ.items()]
        rows += [["ratio", k, _num(v), percent(v)] for k, v in ratios.items()]
        _emit(args, _rows_to_csv(["kind", "name", "value", "percent"], rows))
    return EXIT_OK


def attention_demo(seq: int, d: int, fmt, ks: list[int], seed: int, rule: OffsetRule,
                   literal_eq3: bool = False, lmul_values: bool = False) -> dict:
    h, wq, wk, wv = random_attention_inputs(seq, d, fmt, seed)
    ref = attention_forward(h, wq, wk, wv, Exact(), literal_eq3)
    results = []
    for k in ks:
        y = attention_forward(h, wq, wk, wv, LMulAttention(k, rule, lmul_values), literal_eq3)
        entry = {"k": k, "l": offset_exponent(k, rule) if k >= 1 else None}
        entry.update(error_metrics(y, ref).as_dict())
        results.append(entry)
    return {"seq": seq, "d": d, "format": fmt.name, "seed": seed, "l_rule": str(rule),
            "literal_eq3": literal_eq3, "lmul_values": lmul_values, "results": results}


def cmd_attention_demo(args) -> int:
    fmt = get_format(args.dtype)
    ks = parse_int_range(args.k) if args.k else [fmt.man_bits]
    rule = OffsetRule.parse(args.l_rule)
    report = attention_demo(args.seq, args.d, fmt, ks, args.seed, rule, args.literal_eq3, args.lmul_values)
    if args.format == "csv":
        cols = ["k", "l", "mse", "mean_err", "max_rel_err", "cosine"]
        rows = [[r["k"], r["l"]] + ["" if r[c] is None else _num(r[c]) for c in cols[2:]]
                for r in report["results"]]
        _emit(args, _rows_to_csv(cols, rows))
    else:
        _emit(args, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_histogram_expectations(args) -> int:
    fmt = get_format(args.dtype)
    dist = load_histogram(args.hist)
    rule = OffsetRule.parse(args.l_rule)
    reports = [expectations(dist, fmt, k, rule) for k in parse_int_range(args.k)]
    if args.format == "json":
        _emit(args, json.dumps({"format": fmt.name, "l_rule": str(rule),
                                "rows": [r.as_dict() for r in reports]}, indent=2, sort_keys=True) + "\n")
    else:
        cols = ["k", "l", "e_xk", "e_xr", "f1", "f2", "total", "exp_scale"]
        rows = [[r.k, r.l] + [_num(getattr(r, c)) for c in cols[2:]] for r in reports]
        _emit(args, _rows_to_csv(cols, rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default csv; json for attention-demo)")

    ap = argparse.ArgumentParser(prog="lmulkit", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    fmt_names = list(FORMATS)

    p = sub.add_parser("verify", parents=[common], help="exhaustive adder-vs-semantics check (8-bit formats)")
    p.add_argument("--dtype", choices=fmt_names, default="fp8_e4m3")
    p.add_argument("--corrupt-offset", type=int, default=0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table-a1", parents=[common], help="even-distribution error expectations, m=7, k=1..6")
    p.add_argument("--l-rule", default=str(TABLE_A1_RULE), help="'eq1' or a constant l (default 4)")
    p.set_defaults(func=cmd_table_a1)

    p = sub.add_parser("error-sweep", parents=[common], help="Monte Carlo mse over (k, l)")
    p.add_argument("--dtype", choices=fmt_names, default="bf16")
    p.add_argument("--k", default="1-7", help="k values, e.g. 1-7 (default 1-7)")
    p.add_argument("--l", default="1-7", help="l values, or 'eq1' for l(k) (default 1-7)")
    p.add_argument("--dist", default="even", help="even[:EXP|:LO..HI] or hist:PATH (default even)")
    p.add_argument("--n", type=int, default=100_000, help="samples (default 100000)")
    p.add_argument("--workers", type=int, default=1, help="worker threads; output is identical for any count")
    p.set_defaults(func=cmd_error_sweep)

    p = sub.add_parser("gates", parents=[common], help="gate counts for L-Mul and FP multipliers")
    p.set_defaults(func=cmd_gates)

    p = sub.add_parser("energy", parents=[common], help="energy table and derived ratios")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("attention-demo", parents=[common], help="exact vs L-Mul toy attention")
    p.add_argument("--seq", type=int, default=8)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--dtype", choices=fmt_names, default="bf16")
    p.add_argument("--k", default=None, help="k or range (default: format mantissa bits)")
    p.add_argument("--l-rule", default="eq1", help="'eq1' (default) or a constant l")
    p.add_argument("--literal-eq3", action="store_true", help="multiply attention weights by H, not V")
    p.add_argument("--lmul-values", action="store_true", help="also L-Mul the post-softmax product")
    p.set_defaults(func=cmd_attention_demo, default_format="json")

    p = sub.add_parser("histogram-expectations", parents=[common],
                       help="analytic expectations under a user 'value,weight' histogram")
    p.add_argument("--hist", required=True)
    p.add_argument("--dtype", choices=fmt_names, default="bf16")
    p.add_argument("--k", default="1-6")
    p.add_argument("--l-rule", default=str(TABLE_A1_RULE))
    p.set_defaults(func=cmd_histogram_expectations)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = getattr(args, "default_format", "csv")
    if args.seed < 0:
        parser.error("--seed must be non-negative")
    try:
        return args.func(args)
    except (ArgError, InputError, ValueError, OSError) as e:
        print(f"lmulkit {args.command}: error: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    raise SystemExit(main())
