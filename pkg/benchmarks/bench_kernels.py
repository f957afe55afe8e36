"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py            # kernels and end-to-end runs
    python benchmarks/bench_kernels.py --quick    # smaller sizes
    python benchmarks/bench_kernels.py --json out.json

Each case is run ``--repeat`` times per backend and the best wall time kept.
End-to-end cases swap the module-level kernel handle, so the same high-level
call exercises either backend.
"""
import argparse
import json
import sys
import time
from contextlib import contextmanager

import numpy as np

from gmeasure import available_backends, gfunction, make_builtin, measure, transfer
from gmeasure.measure import CellDensity, mass_vector_certified
from gmeasure.transfer import contraction_profile, density_g_n


@contextmanager
def using(mod):
    saved = [m.kernels for m in (gfunction, transfer, measure)]
    for m in (gfunction, transfer, measure):
        m.kernels = mod
    try:
        yield
    finally:
        for m, k in zip((gfunction, transfer, measure), saved):
            m.kernels = k


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(level):
    size = 1 << level
    rng = np.random.default_rng(0)
    f0 = rng.random(size)
    g = rng.random(size)
    gh = np.minimum(g + 0.01, 1.0)
    lo0, hi0 = f0 - 0.01, f0 + 0.01
    tent = make_builtin("tent")
    with np.errstate(divide="ignore"):
        logg = np.log2(make_builtin("sqrt").sample(level))
    gtab = np.ascontiguousarray(tent.sample(min(level + 4, 26)))
    top = level - 4

    def grid_step(k):
        f = f0.copy()
        half = size >> 1
        while half:
            k.grid_step(f, g, half)
            half >>= 1

    def cell_step(k):
        lo, hi = lo0.copy(), hi0.copy()
        half = size >> 1
        while half:
            k.cell_step(lo, hi, g, gh, half)
            half >>= 1

    def cell_products(k):
        n = 1 << top
        k.cell_products(gtab, min(level + 4, 26), top, 3, 8, np.zeros(8), np.ones(n + 1),
                        np.ones(n), np.ones(n), True)

    return {
        "grid_step (full sweep)": grid_step,
        "cell_step (full sweep)": cell_step,
        "log_density (n=12)": lambda k: k.log_density(logg, level, 12),
        "sinpi_sq_affine": lambda k: k.sinpi_sq_affine(level, 7, 3, size),
        "cell_products (k=8)": cell_products,
    }


def end_to_end_cases(quick):
    tm = make_builtin("tm")
    return {
        "contraction tm n=20 level 6": lambda: contraction_profile(
            tm, CellDensity(tm, 0, 1), 16 if quick else 20, 6),
        "mass vector tent k=6": lambda: mass_vector_certified(make_builtin("tent"),
                                                              4 if quick else 6),
        "density tm n=11 level 19": lambda: density_g_n(tm, 11, 15 if quick else 19),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=20, help="grid level for kernel cases")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    level = 14 if args.quick else args.level

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy kernels only", file=sys.stderr)
    names = sorted(backends)
    rows = []
    for case, fn in kernel_cases(level).items():
        rows.append((case, {b: best_of(lambda: fn(backends[b]), args.repeat) for b in names}))
    for case, fn in end_to_end_cases(args.quick).items():
        t = {}
        for b in names:
            with using(backends[b]):
                t[b] = best_of(fn, args.repeat)
        rows.append((case, t))

    width = max(len(c) for c, _ in rows)
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>10}" for b in names)
          + ("  speedup" if len(names) > 1 else ""))
    for case, t in rows:
        line = f"{case:<{width}}  " + "  ".join(f"{t[b]:>9.4f}s" for b in names)
        if "cython" in t:
            line += f"  {t['python'] / t['cython']:>6.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"level": level, "repeat": args.repeat,
                       "results": [{"case": c, "seconds": t} for c, t in rows]}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
