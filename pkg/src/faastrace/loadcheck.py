"""Planned-vs-sent-vs-executed load validation via dynamic time warping.

A load experiment is trustworthy only if the schedule the generator was
given, the requests it actually sent, and the requests the platform
executed all tell the same story.  Series are compared with dynamic time
warping (shape, tolerant of sub-second shifts) and with total-volume
deviation; both must clear their thresholds for a verdict to pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _dtw

DEFAULT_RADIUS = 10
DEFAULT_DEVIATION_THRESHOLD = 0.10
DEFAULT_DISTANCE_BOUND = 1.0


@dataclass(frozen=True)
class LoadVerdict:
    """Outcome of comparing an observed series against a baseline."""

    dtw_distance: float
    normalized_distance: float
    total_deviation: float
    passed: bool
    deviation_threshold: float
    distance_bound: float


def _as_array(series, role: str) -> np.ndarray:
    values = getattr(series, "rates", series)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{role} series must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{role} series is empty")
    return arr


def dtw_exact(
    a: Sequence[float], b: Sequence[float]
) -> tuple[float, int]:
    """Exact DTW distance and optimal warping-path length.

    Classic dynamic program with absolute-difference local cost and the
    match/insert/delete step set.  Quadratic in the series lengths; the
    reference oracle for fastdtw.
    """
    x = _as_array(a, "first")
    y = _as_array(b, "second")
    lo, hi = _dtw.full_window(x.size, y.size)
    d = _dtw.fill(x, y, lo, hi)
    path = _dtw.backtrack(d, lo, hi)
    return float(d[-1, y.size - 1]), len(path)


def _halve(x: np.ndarray) -> np.ndarray:
    if x.size % 2:
        return np.concatenate([(x[:-1:2] + x[1::2]) / 2.0, x[-1:]])
    return (x[::2] + x[1::2]) / 2.0


def _corridor(
    coarse_path: list[tuple[int, int]], n: int, m: int, radius: int
) -> tuple[np.ndarray, np.ndarray]:
    """Project a coarse warping path up to n x m and expand by radius."""
    n_coarse = (n + 1) // 2
    lo_c = np.full(n_coarse, np.iinfo(np.int64).max, dtype=np.int64)
    hi_c = np.full(n_coarse, -1, dtype=np.int64)
    for i, j in coarse_path:
        if j < lo_c[i]:
            lo_c[i] = j
        if j > hi_c[i]:
            hi_c[i] = j
    rows = np.minimum(np.arange(n) // 2, n_coarse - 1)
    lo = 2 * lo_c[rows]
    hi = 2 * hi_c[rows] + 1
    # Vertical then horizontal expansion; windows are monotone, so the
    # vertical union reduces to an index shift.
    up = np.maximum(np.arange(n) - radius, 0)
    down = np.minimum(np.arange(n) + radius, n - 1)
    lo = np.maximum(lo[up] - radius, 0)
    hi = np.minimum(hi[down] + radius, m - 1)
    return lo, hi


def _fastdtw(
    x: np.ndarray, y: np.ndarray, radius: int
) -> tuple[float, list[tuple[int, int]]]:
    base = max(radius + 2, 10)
    if x.size <= base or y.size <= base:
        lo, hi = _dtw.full_window(x.size, y.size)
    else:
        _, coarse_path = _fastdtw(_halve(x), _halve(y), radius)
        lo, hi = _corridor(coarse_path, x.size, y.size, radius)
    d = _dtw.fill(x, y, lo, hi)
    path = _dtw.backtrack(d, lo, hi)
    return float(d[-1, y.size - 1 - lo[-1]]), path


def fastdtw(
    a: Sequence[float], b: Sequence[float], radius: int = DEFAULT_RADIUS
) -> tuple[float, int]:
    """Approximate DTW distance and warping-path length.

    Recursively coarsens both series by pairwise averaging down to a
    base size, solves exactly there, and refines the solution upward by
    restricting each finer search to the projected path expanded by
    radius.  The search space is a subset of the exact one, so the
    returned distance is never below dtw_exact's.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    x = _as_array(a, "first")
    y = _as_array(b, "second")
    distance, path = _fastdtw(x, y, radius)
    return distance, len(path)


def total_deviation(a: Sequence[float], b: Sequence[float]) -> float:
    """Relative volume difference |sum(a) - sum(b)| / sum(a)."""
    x = _as_array(a, "baseline")
    y = _as_array(b, "observed")
    base = float(x.sum())
    diff = abs(base - float(y.sum()))
    if base == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / base


def compare_load(
    baseline: Sequence[float],
    observed: Sequence[float],
    *,
    radius: int = DEFAULT_RADIUS,
    deviation_threshold: float = DEFAULT_DEVIATION_THRESHOLD,
    distance_bound: float = DEFAULT_DISTANCE_BOUND,
    roles: tuple[str, str] = ("baseline", "observed"),
) -> LoadVerdict:
    """Verdict for one observed series against its baseline."""
    x = _as_array(baseline, roles[0])
    y = _as_array(observed, roles[1])
    distance, path_length = fastdtw(x, y, radius)
    normalized = distance / path_length
    deviation = total_deviation(x, y)
    return LoadVerdict(
        dtw_distance=distance,
        normalized_distance=normalized,
        total_deviation=deviation,
        passed=deviation < deviation_threshold and normalized < distance_bound,
        deviation_threshold=deviation_threshold,
        distance_bound=distance_bound,
    )


def validate_load(
    planned: Sequence[float],
    sent: Sequence[float],
    executed: Sequence[float],
    *,
    radius: int = DEFAULT_RADIUS,
    deviation_threshold: float = DEFAULT_DEVIATION_THRESHOLD,
    distance_bound: float = DEFAULT_DISTANCE_BOUND,
) -> tuple[LoadVerdict, LoadVerdict]:
    """Verdicts for planned vs sent and sent vs executed."""
    p = _as_array(planned, "planned")
    s = _as_array(sent, "sent")
    e = _as_array(executed, "executed")
    kwargs = dict(
        radius=radius,
        deviation_threshold=deviation_threshold,
        distance_bound=distance_bound,
    )
    return (
        compare_load(p, s, roles=("planned", "sent"), **kwargs),
        compare_load(s, e, roles=("sent", "executed"), **kwargs),
    )
