#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure numpy/python fallbacks.

Run directly: ``python3 benchmarks/bench_kernels.py``. Set TABUQ_NO_NUMBA=1
to confirm the fallback path is the one being exercised everywhere.
"""

import time

import numpy as np

from tabuq import kernels


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_levenshtein(n_pairs=2000, length=48):
    rng = np.random.default_rng(0)
    pairs = [
        (
            rng.integers(97, 123, length).astype(np.int64),
            rng.integers(97, 123, length).astype(np.int64),
        )
        for _ in range(n_pairs)
    ]

    def run_selected():
        return [kernels.levenshtein_codes(a, b) for a, b in pairs]

    def run_fallback():
        return [kernels._levenshtein_py(list(a), list(b)) for a, b in pairs]

    if kernels.NUMBA_ENABLED:
        kernels.levenshtein_codes(*pairs[0])  # JIT warmup
    fast_t, fast = time_call(run_selected)
    slow_t, slow = time_call(run_fallback, repeats=2)
    assert fast == slow
    label = "numba" if kernels.NUMBA_ENABLED else "selected (fallback)"
    print(f"levenshtein ({n_pairs} pairs, len {length}):")
    print(f"  {label:>20}: {fast_t:.3f}s")
    print(f"  {'python fallback':>20}: {slow_t:.3f}s")
    print(f"  {'speedup':>20}: {slow_t / fast_t:.1f}x")


def bench_pairwise_ioa(n_spans=600, n_cells=1500):
    rng = np.random.default_rng(1)

    def boxes(n):
        x0 = rng.uniform(0, 900, n)
        y0 = rng.uniform(0, 900, n)
        return np.stack([x0, y0, x0 + rng.uniform(1, 90, n), y0 + rng.uniform(1, 40, n)], axis=1)

    spans, cells = boxes(n_spans), boxes(n_cells)
    if kernels.NUMBA_ENABLED:
        kernels.pairwise_ioa(spans[:2], cells[:2])  # JIT warmup
    fast_t, fast = time_call(kernels.pairwise_ioa, spans, cells)
    slow_t, slow = time_call(kernels._pairwise_ioa_np, spans, cells)
    np.testing.assert_array_equal(fast, slow)
    label = "numba" if kernels.NUMBA_ENABLED else "selected (fallback)"
    print(f"pairwise_ioa ({n_spans} spans x {n_cells} cells):")
    print(f"  {label:>20}: {fast_t * 1000:.1f}ms")
    print(f"  {'numpy fallback':>20}: {slow_t * 1000:.1f}ms")
    print(f"  {'speedup':>20}: {slow_t / fast_t:.1f}x")


if __name__ == "__main__":
    print(f"numba path enabled: {kernels.NUMBA_ENABLED}\n")
    bench_levenshtein()
    print()
    bench_pairwise_ioa()
