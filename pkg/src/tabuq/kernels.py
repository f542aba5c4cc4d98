"""Hot numeric kernels: numba-compiled by default, numpy/python fallback on demand.

Set ``TABUQ_NO_NUMBA=1`` (or ``true``/``yes``) to force the fallback path even
when numba is installed. ``benchmarks/bench_kernels.py`` times both paths.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("TABUQ_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes")


def _levenshtein_py(a: np.ndarray, b: np.ndarray) -> int:
    """Two-row edit distance over code-point arrays."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    curr = [0] * (m + 1)
    for i in range(1, n + 1):
        curr[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost)
        prev, curr = curr, prev
    return prev[m]


def _pairwise_ioa_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Overlap of each box in ``a`` with each box in ``b``, normalized by the area of ``a``.

    ``a`` and ``b`` are (n, 4) and (m, 4) arrays of [x0, y0, x1, y1]; the result
    is (n, m). Rows of ``a`` with zero area yield zeros.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where(w > 0, w, 0.0) * np.where(h > 0, h, 0.0)
    denom = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    out = np.zeros_like(inter)
    np.divide(inter, denom[:, None], out=out, where=denom[:, None] > 0)
    return out


NUMBA_ENABLED = False

if _numba_requested():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    @njit(cache=True)
    def _levenshtein_nb(a, b):  # pragma: no cover - measured via wrapper
        n = a.shape[0]
        m = b.shape[0]
        if n == 0:
            return m
        if m == 0:
            return n
        prev = np.arange(m + 1, dtype=np.int64)
        curr = np.zeros(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            curr[0] = i
            ai = a[i - 1]
            for j in range(1, m + 1):
                cost = 0 if ai == b[j - 1] else 1
                best = prev[j] + 1
                if curr[j - 1] + 1 < best:
                    best = curr[j - 1] + 1
                if prev[j - 1] + cost < best:
                    best = prev[j - 1] + cost
                curr[j] = best
            prev, curr = curr, prev
        return prev[m]

    @njit(cache=True)
    def _pairwise_ioa_nb(a, b):  # pragma: no cover - measured via wrapper
        n = a.shape[0]
        m = b.shape[0]
        out = np.zeros((n, m))
        for i in range(n):
            ax0 = a[i, 0]
            ay0 = a[i, 1]
            ax1 = a[i, 2]
            ay1 = a[i, 3]
            denom = (ax1 - ax0) * (ay1 - ay0)
            if denom <= 0:
                continue
            for j in range(m):
                w = min(ax1, b[j, 2]) - max(ax0, b[j, 0])
                if w <= 0:
                    continue
                h = min(ay1, b[j, 3]) - max(ay0, b[j, 1])
                if h <= 0:
                    continue
                out[i, j] = w * h / denom
        return out


def levenshtein_codes(a: np.ndarray, b: np.ndarray) -> int:
    """Edit distance between two int64 arrays of unicode code points."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if NUMBA_ENABLED:
        return int(_levenshtein_nb(a, b))
    return int(_levenshtein_py(a, b))


def pairwise_ioa(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection-over-area matrix; see `_pairwise_ioa_np` for the contract."""
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 4))
    b = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    if NUMBA_ENABLED and a.shape[0] and b.shape[0]:
        return _pairwise_ioa_nb(a, b)
    return _pairwise_ioa_np(a, b)


def text_to_codes(s: str) -> np.ndarray:
    """Unicode scalar values of ``s`` as an int64 array."""
    return np.array([ord(c) for c in s], dtype=np.int64)
