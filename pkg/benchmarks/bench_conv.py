#!/usr/bin/env python3
"""Benchmark the correlation backends (numpy/BLAS vs compiled loops).

Runs forward, filter-gradient and input-gradient kernels over a grid of
1D and 2D problem sizes and prints a per-backend timing table.  Used to
justify the default backend choice on a given machine; re-run after
changing BLAS builds or compilers.

All timings for one backend are taken consecutively (with a short pause
between backends) so the thread pools of BLAS and OpenMP do not spin
against each other and poison the numbers.

    python3 benchmarks/bench_conv.py [--repeats N]
"""

import argparse
import time

import numpy as np

from convgp import _ref
from convgp.rng import make_rng

try:
    from convgp import _native
except ImportError:
    _native = None


CASES = [
    # (dims, channels, filters, width, extent)
    (1, 4, 4, 3, 64),
    (1, 32, 32, 3, 128),
    (1, 64, 64, 3, 512),
    (1, 256, 256, 3, 512),
    (2, 4, 4, 3, 16),
    (2, 16, 16, 3, 32),
    (2, 32, 32, 3, 64),
    (2, 64, 64, 3, 64),
]


def _time(fn, *args, repeats):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _case_inputs(dims, c, f, d, ext, rng):
    if dims == 1:
        xpad = rng.standard_normal((c, ext + d - 1))
        w = rng.standard_normal((f, c, d))
        g = rng.standard_normal((f, ext))
        flops = 2.0 * f * c * d * ext
    else:
        xpad = rng.standard_normal((c, ext + d - 1, ext + d - 1))
        w = rng.standard_normal((f, c, d, d))
        g = rng.standard_normal((f, ext, ext))
        flops = 2.0 * f * c * d * d * ext * ext
    return xpad, w, g, flops


def _measure(mod, repeats):
    results = {}
    rng = make_rng(0)
    for case in CASES:
        dims, c, f, d, ext = case
        xpad, w, g, _ = _case_inputs(dims, c, f, d, ext, rng)
        if dims == 1:
            rows = [
                ("fwd", lambda: mod.corr1d(xpad, w)),
                ("gw", lambda: mod.corr1d_grad_w(xpad, g, d)),
                ("gx", lambda: mod.corr1d_grad_x(w, g)),
            ]
        else:
            rows = [
                ("fwd", lambda: mod.corr2d(xpad, w)),
                ("gw", lambda: mod.corr2d_grad_w(xpad, g, d, d)),
                ("gx", lambda: mod.corr2d_grad_x(w, g)),
            ]
        for kname, call in rows:
            results[(case, kname)] = _time(call, repeats=repeats)
    return results


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    backends = [("numpy", _ref)]
    if _native is not None:
        backends.append(("native", _native))
    else:
        print("note: compiled extension not built; benchmarking numpy only")

    all_results = {}
    for name, mod in backends:
        all_results[name] = _measure(mod, args.repeats)
        time.sleep(0.25)  # let the other pool's spinners park

    header = f"{'case':<38}{'kernel':<8}" + "".join(
        f"{name:>13}" for name, _ in backends
    )
    print(header)
    print("-" * len(header))
    rng = make_rng(0)
    for case in CASES:
        dims, c, f, d, ext = case
        _, _, _, flops = _case_inputs(dims, c, f, d, ext, rng)
        shape = f"T={ext}" if dims == 1 else f"{ext}x{ext}"
        label = f"{dims}d c={c} f={f} d={d} {shape} ({flops / 1e6:.0f} MFLOP)"
        for kname in ("fwd", "gw", "gx"):
            cells = "".join(
                f"{all_results[name][(case, kname)] * 1e3:>10.2f} ms"
                for name, _ in backends
            )
            print(f"{label:<38}{kname:<8}{cells}")
            label = ""

    if _native is not None:
        rng2 = make_rng(1)
        xpad = rng2.standard_normal((8, 66))
        w = rng2.standard_normal((8, 8, 3))
        agree = np.allclose(_ref.corr1d(xpad, w), _native.corr1d(xpad, w), atol=1e-10)
        print(f"\nbackend agreement on a probe case: {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
