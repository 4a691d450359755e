"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--n 1000000]

Prints one line per kernel with the best wall time of each backend, the
speedup and whether the two outputs are identical.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from peakheight import _pykernels

try:
    from peakheight import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n: int):
    rng = np.random.default_rng(0)
    for d in (2, 3, 4):
        q = d * (d + 1) // 2
        hv = rng.standard_normal((n, q))
        # shift diagonals so a fair share of draws is negative definite
        diag = [j * d - j * (j - 1) // 2 for j in range(d)]
        hv[:, diag] -= 1.5
        yield f"hessian_weights d={d} n={n}", lambda k, hv=hv, d=d: k.hessian_weights(hv, d)
    hv = rng.standard_normal((n, 6))
    beta, x = rng.standard_normal(6), rng.standard_normal(n)
    yield f"hessian_weights shifted d=3 n={n}", lambda k: k.hessian_weights(hv, 3, beta, x)
    vals = rng.standard_normal((256, 20 * 20 * 20))
    for full in (False, True):
        label = "full" if full else "axis"
        yield (f"local_maxima_mask 20^3 x 256 {label}",
               lambda k, full=full: k.local_maxima_mask(vals, (20, 20, 20), full))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=1_000_000)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1
    print(f"{'kernel':44s} {'python s':>10s} {'compiled s':>10s} {'speedup':>8s}  identical")
    for name, fn in cases(args.n):
        tp, op = best_time(lambda: fn(_pykernels), args.repeat)
        tc, oc = best_time(lambda: fn(_kernels), args.repeat)
        same = bool(np.array_equal(np.asarray(op), np.asarray(oc)))
        print(f"{name:44s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
