"""Benchmark the compiled log-rank split scanner against the pure-Python
fallback.

The split scan is the training hot path: every node of every tree evaluates
every candidate threshold of every candidate feature. Both backends share
the exact floating-point accumulation order, so this is a pure speed
comparison on identical inputs.

Usage: python benchmarks/bench_split.py [--sizes 100,500,2000] [--repeats 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fedsurv import _split
from fedsurv._split_py import best_split as py_best_split
from fedsurv.survival import risk_table_from_arrays


def make_case(n: int, seed: int):
    rng = np.random.default_rng(seed)
    values = np.sort(rng.normal(size=n))
    times = rng.integers(1, max(3, n // 2), size=n).astype(np.float64)
    events = (rng.random(n) < 0.6).astype(np.uint8)
    table = risk_table_from_arrays(times, events.astype(bool))
    return (values, times, events, table.event_times, table.at_risk, table.events, 3)


def bench(fn, args, repeats: int, inner: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="100,500,2000,10000")
    parser.add_argument("--repeats", type=int, default=5)
    opts = parser.parse_args()
    sizes = [int(s) for s in opts.sizes.split(",")]

    if _split.BACKEND != "cython":
        print("warning: compiled backend unavailable; comparing python to itself")

    print(f"native backend: {_split.BACKEND}")
    print(f"{'n':>7} {'python':>12} {'native':>12} {'speedup':>9}")
    for n in sizes:
        args = make_case(n, seed=n)
        assert py_best_split(*args) == _split.best_split(*args), "backends disagree"
        inner = max(1, 20_000 // n)
        t_py = bench(py_best_split, args, opts.repeats, inner)
        t_native = bench(_split.best_split, args, opts.repeats, inner)
        print(f"{n:>7} {t_py * 1e6:>10.1f}us {t_native * 1e6:>10.1f}us "
              f"{t_py / t_native:>8.1f}x")


if __name__ == "__main__":
    main()
