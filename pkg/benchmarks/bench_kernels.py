"""Compare the compiled kernels against the pure-Python fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 3]``

Each kernel is timed on both backends with identical inputs and the outputs
are checked for equality before any timing is reported.
"""
import argparse
import time

import numpy as np

from sftembed import _kernels_py as pure

try:
    from sftembed import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def cases(n):
    rng = np.random.default_rng(0)
    seq = rng.integers(0, 2, n)
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    cum = np.cumsum(P, axis=1)
    uniforms = rng.random(n)
    positions = np.sort(rng.choice(10 * n, n, replace=False))
    gid = rng.integers(0, 1000, n)
    return {
        "find_occurrences": lambda k: k.find_occurrences(seq, np.array([0, 0, 1, 1])),
        "markov_walk": lambda k: k.markov_walk(cum, 0, uniforms),
        "splitmix64_stream": lambda k: k.splitmix64_stream(12345, n),
        "min_gap_by_group": lambda k: k.min_gap_by_group(gid, positions, 1000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not available; build with pip install -e . --no-build-isolation")
    print(f"{'kernel':<20} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, call in cases(args.n).items():
        tp, outp = best_time(lambda: call(pure), args.repeat)
        if compiled is None:
            print(f"{name:<20} {tp:>10.4f} {'-':>10} {'-':>8}")
            continue
        tc, outc = best_time(lambda: call(compiled), args.repeat)
        if not same(outp, outc):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<20} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
