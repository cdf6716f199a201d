"""Banded dynamic-time-warping kernels, jitted with a vectorized fallback.

The dynamic program runs over a per-row column corridor [lo[i], hi[i]]
stored as a dense (rows x max_width) band.  A full-matrix fill is the
special case lo = 0, hi = m - 1.  The fallback vectorizes each row scan:
with costs c, their prefix sums cs, and m1[j] = min(up, diag), the
recurrence D[j] = c[j] + min(m1[j], D[j-1]) unrolls to
D[j] = cs[j] + min_{k <= j}(m1[k] - cs[k] + c[k]), a running minimum.
Both fills produce identical tables on integer-valued series.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


@njit(cache=True)
def _fill_jit(a, b, lo, hi, width):  # pragma: no cover - jitted
    n = a.shape[0]
    d = np.full((n, width), np.inf)
    acc = 0.0
    for jj in range(hi[0] - lo[0] + 1):
        acc += abs(a[0] - b[lo[0] + jj])
        d[0, jj] = acc
    for i in range(1, n):
        li = lo[i]
        lp = lo[i - 1]
        hp = hi[i - 1]
        for jj in range(hi[i] - li + 1):
            j = li + jj
            best = np.inf
            if j >= lp and j <= hp:
                v = d[i - 1, j - lp]
                if v < best:
                    best = v
            if j - 1 >= lp and j - 1 <= hp:
                v = d[i - 1, j - 1 - lp]
                if v < best:
                    best = v
            if jj > 0:
                v = d[i, jj - 1]
                if v < best:
                    best = v
            d[i, jj] = abs(a[i] - b[j]) + best
    return d


def _fill_numpy(a, b, lo, hi, width):
    n = a.shape[0]
    d = np.full((n, width), np.inf)
    d[0, : hi[0] - lo[0] + 1] = np.cumsum(np.abs(a[0] - b[lo[0] : hi[0] + 1]))
    for i in range(1, n):
        li, hi_i = lo[i], hi[i]
        lp, hp = lo[i - 1], hi[i - 1]
        w = hi_i - li + 1
        c = np.abs(a[i] - b[li : hi_i + 1])
        prev_up = np.full(w, np.inf)
        prev_diag = np.full(w, np.inf)
        s, e = max(li, lp), min(hi_i, hp)
        if s <= e:
            prev_up[s - li : e - li + 1] = d[i - 1, s - lp : e - lp + 1]
        s, e = max(li, lp + 1), min(hi_i, hp + 1)
        if s <= e:
            prev_diag[s - li : e - li + 1] = d[i - 1, s - 1 - lp : e - lp]
        m1 = np.minimum(prev_up, prev_diag)
        cs = np.cumsum(c)
        d[i, :w] = cs + np.minimum.accumulate(m1 - cs + c)
    return d


def fill(a, b, lo, hi):
    """Accumulated-cost band for series a, b over corridor [lo, hi]."""
    width = int(np.max(hi - lo) + 1)
    if USE_NUMBA:
        return _fill_jit(a, b, lo, hi, width)
    return _fill_numpy(a, b, lo, hi, width)


def backtrack(d, lo, hi):
    """Optimal warping path through a filled band, start to end.

    Ties prefer the diagonal step, then the vertical, then the
    horizontal, so both fills yield identical paths.
    """
    i = d.shape[0] - 1
    j = int(hi[i])
    path = [(i, j)]
    while i > 0 or j > 0:
        best = np.inf
        move = (i, j)
        if i > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            v = d[i - 1, j - 1 - lo[i - 1]]
            if v < best:
                best, move = v, (i - 1, j - 1)
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = d[i - 1, j - lo[i - 1]]
            if v < best:
                best, move = v, (i - 1, j)
        if j - 1 >= lo[i]:
            v = d[i, j - 1 - lo[i]]
            if v < best:
                best, move = v, (i, j - 1)
        i, j = move
        path.append((i, j))
    path.reverse()
    return path


def full_window(n, m):
    """Trivial corridor covering the whole n x m table."""
    return (
        np.zeros(n, dtype=np.int64),
        np.full(n, m - 1, dtype=np.int64),
    )
