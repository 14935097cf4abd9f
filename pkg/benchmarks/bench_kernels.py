"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lmulkit import _pykernels
from lmulkit.fpcodec import FP8_E4M3
from lmulkit.lmul import offset_constant, offset_exponent

try:
    from lmulkit import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--prng-n", type=int, default=1_000_000)
    args = ap.parse_args(argv)

    fmt = FP8_E4M3
    off = offset_constant(fmt, offset_exponent(fmt.man_bits))
    pats = np.arange(256, dtype=np.uint64)
    xs, ys = np.repeat(pats, 256), np.tile(pats, 256)

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the Python backend only")

    print(f"{'kernel':<28}{'backend':<10}{'seconds':>12}")
    results = {}
    for name, mod in backends:
        t = best_of(lambda: mod.xorshift64star_fill(0, args.prng_n), args.repeat)
        results[("prng", name)] = t
        print(f"{f'prng fill n={args.prng_n}':<28}{name:<10}{t:>12.5f}")
        t = best_of(lambda: mod.lmul_bits_batch(xs, ys, fmt.exp_bits, fmt.man_bits, off, True), args.repeat)
        results[("lmul", name)] = t
        print(f"{'lmul batch 2^16 pairs':<28}{name:<10}{t:>12.5f}")
    if _ckernels is not None:
        for kernel in ("prng", "lmul"):
            print(f"{kernel} speedup: {results[(kernel, 'python')] / results[(kernel, 'cython')]:.1f}x")


if __name__ == "__main__":
    main()
