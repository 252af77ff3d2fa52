"""Hot numeric kernels with two interchangeable implementations.

Every kernel exists twice: a ``*_loop`` version compiled with numba's
``@njit`` and a ``*_vec`` version written against plain numpy (scipy.sparse
for the triangle count).  The public names bind to the loop versions when
numba is active and to the vectorized versions otherwise; see ``_accel``
for the ``BEHAVFID_NO_NUMBA`` switch.  ``benchmarks/bench_kernels.py``
times the two paths against each other.

Conventions shared by the window kernels (and mirrored by the brute-force
oracles in the test suite):

- timestamps are sorted ascending, float64 seconds;
- windows are trailing half-open intervals ``(t - w, t]`` anchored at the
  rows that carry the aggregated value (rows with missing values are
  filtered out by the caller before the kernel runs);
- the kernels answer "does any window exceed the threshold" and return
  early on the first hit.
"""

from __future__ import annotations

import numpy as np

from ._accel import USING_NUMBA, njit

# ---------------------------------------------------------------------------
# Wasserstein-1 between two empirical distributions.
# ---------------------------------------------------------------------------


def w1_from_sorted_vec(a: np.ndarray, b: np.ndarray) -> float:
    """Exact W1 via the merged-breakpoint CDF-difference integral."""
    merged = np.concatenate((a, b))
    merged.sort(kind="mergesort")
    gaps = np.diff(merged)
    cdf_a = np.searchsorted(a, merged[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * gaps))


@njit(cache=True)
def w1_from_sorted_loop(a: np.ndarray, b: np.ndarray) -> float:
    na = a.size
    nb = b.size
    fa = 1.0 / na
    fb = 1.0 / nb
    ia = 0
    ib = 0
    cdf_a = 0.0
    cdf_b = 0.0
    total = 0.0
    prev = a[0] if a[0] <= b[0] else b[0]
    while ia < na or ib < nb:
        if ib >= nb or (ia < na and a[ia] <= b[ib]):
            cur = a[ia]
        else:
            cur = b[ib]
        total += abs(cdf_a - cdf_b) * (cur - prev)
        while ia < na and a[ia] == cur:
            cdf_a += fa
            ia += 1
        while ib < nb and b[ib] == cur:
            cdf_b += fb
            ib += 1
        prev = cur
    return total


# ---------------------------------------------------------------------------
# Burst segmentation: lengths of maximal runs with internal gaps <= delta.
# ---------------------------------------------------------------------------


def burst_lengths_vec(ts: np.ndarray, delta: float) -> np.ndarray:
    if ts.size == 0:
        return np.empty(0, dtype=np.int64)
    breaks = np.flatnonzero(np.diff(ts) > delta)
    edges = np.concatenate(([0], breaks + 1, [ts.size]))
    return np.diff(edges).astype(np.int64)


@njit(cache=True)
def burst_lengths_loop(ts: np.ndarray, delta: float) -> np.ndarray:
    n = ts.size
    if n == 0:
        return np.empty(0, dtype=np.int64)
    n_bursts = 1
    for i in range(1, n):
        if ts[i] - ts[i - 1] > delta:
            n_bursts += 1
    out = np.empty(n_bursts, dtype=np.int64)
    k = 0
    run = 1
    for i in range(1, n):
        if ts[i] - ts[i - 1] > delta:
            out[k] = run
            k += 1
            run = 1
        else:
            run += 1
    out[k] = run
    return out


# ---------------------------------------------------------------------------
# Sliding-window rule evaluators (boolean "ever exceeds").
# ---------------------------------------------------------------------------


def _last_of_tie(ts: np.ndarray) -> np.ndarray:
    """Mask of anchor rows: last index within each group of equal timestamps."""
    if ts.size == 0:
        return np.zeros(0, dtype=bool)
    mask = np.empty(ts.size, dtype=bool)
    mask[:-1] = ts[1:] != ts[:-1]
    mask[-1] = True
    return mask


def window_count_triggered_vec(ts: np.ndarray, window: float, threshold: float) -> bool:
    if ts.size == 0:
        return False
    lo = np.searchsorted(ts, ts - window, side="right")
    counts = np.arange(1, ts.size + 1) - lo
    return bool(np.any(counts[_last_of_tie(ts)] > threshold))


@njit(cache=True)
def window_count_triggered_loop(ts: np.ndarray, window: float, threshold: float) -> bool:
    n = ts.size
    lo = 0
    for r in range(n):
        if r + 1 < n and ts[r + 1] == ts[r]:
            continue
        limit = ts[r] - window
        while ts[lo] <= limit:
            lo += 1
        if (r - lo + 1) > threshold:
            return True
    return False


def window_sum_triggered_vec(
    ts: np.ndarray, values: np.ndarray, window: float, threshold: float
) -> bool:
    if ts.size == 0:
        return False
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    lo = np.searchsorted(ts, ts - window, side="right")
    sums = prefix[1:] - prefix[lo]
    return bool(np.any(sums[_last_of_tie(ts)] > threshold))


@njit(cache=True)
def window_sum_triggered_loop(
    ts: np.ndarray, values: np.ndarray, window: float, threshold: float
) -> bool:
    n = ts.size
    lo = 0
    acc = 0.0
    for r in range(n):
        acc += values[r]
        if r + 1 < n and ts[r + 1] == ts[r]:
            continue
        limit = ts[r] - window
        while ts[lo] <= limit:
            acc -= values[lo]
            lo += 1
        if acc > threshold:
            return True
    return False


def window_distinct_triggered_vec(
    ts: np.ndarray, codes: np.ndarray, n_codes: int, window: float, threshold: float
) -> bool:
    if ts.size == 0:
        return False
    lo = np.searchsorted(ts, ts - window, side="right")
    anchors = np.flatnonzero(_last_of_tie(ts))
    for r in anchors:
        if np.unique(codes[lo[r] : r + 1]).size > threshold:
            return True
    return False


@njit(cache=True)
def window_distinct_triggered_loop(
    ts: np.ndarray, codes: np.ndarray, n_codes: int, window: float, threshold: float
) -> bool:
    n = ts.size
    occur = np.zeros(n_codes, dtype=np.int64)
    lo = 0
    distinct = 0
    for r in range(n):
        c = codes[r]
        if occur[c] == 0:
            distinct += 1
        occur[c] += 1
        if r + 1 < n and ts[r + 1] == ts[r]:
            continue
        limit = ts[r] - window
        while ts[lo] <= limit:
            cl = codes[lo]
            occur[cl] -= 1
            if occur[cl] == 0:
                distinct -= 1
            lo += 1
        if distinct > threshold:
            return True
    return False


def window_spike_triggered_vec(
    ts: np.ndarray, values: np.ndarray, window: float, ratio: float
) -> bool:
    if ts.size == 0:
        return False
    lo = np.searchsorted(ts, ts - window, side="right")
    anchors = np.flatnonzero(_last_of_tie(ts))
    for r in anchors:
        win = values[lo[r] : r + 1]
        if win.size < 2:
            continue
        med = float(np.median(win))
        if med > 0.0 and float(win.max()) / med > ratio:
            return True
    return False


@njit(cache=True)
def window_spike_triggered_loop(
    ts: np.ndarray, values: np.ndarray, window: float, ratio: float
) -> bool:
    n = ts.size
    lo = 0
    for r in range(n):
        if r + 1 < n and ts[r + 1] == ts[r]:
            continue
        limit = ts[r] - window
        while ts[lo] <= limit:
            lo += 1
        if r - lo + 1 < 2:
            continue
        win = values[lo : r + 1]
        med = np.median(win)
        if med > 0.0 and np.max(win) / med > ratio:
            return True
    return False


# ---------------------------------------------------------------------------
# Triangle count on an oriented CSR graph (edges point low-degree -> high).
# ---------------------------------------------------------------------------


def triangle_count_oriented_vec(indptr: np.ndarray, indices: np.ndarray) -> int:
    import scipy.sparse as sp

    n = indptr.size - 1
    if indices.size == 0:
        return 0
    a = sp.csr_matrix(
        (np.ones(indices.size, dtype=np.int64), indices, indptr), shape=(n, n)
    )
    # paths u->v->w that close with an oriented edge u->w
    return int((a @ a).multiply(a).sum())


@njit(cache=True)
def triangle_count_oriented_loop(indptr: np.ndarray, indices: np.ndarray) -> int:
    count = 0
    n = indptr.size - 1
    for u in range(n):
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            i = indptr[u]
            j = indptr[v]
            end_u = indptr[u + 1]
            end_v = indptr[v + 1]
            while i < end_u and j < end_v:
                x = indices[i]
                y = indices[j]
                if x == y:
                    count += 1
                    i += 1
                    j += 1
                elif x < y:
                    i += 1
                else:
                    j += 1
    return count


# ---------------------------------------------------------------------------
# Path selection.
# ---------------------------------------------------------------------------

if USING_NUMBA:
    w1_from_sorted = w1_from_sorted_loop
    burst_lengths = burst_lengths_loop
    window_count_triggered = window_count_triggered_loop
    window_sum_triggered = window_sum_triggered_loop
    window_distinct_triggered = window_distinct_triggered_loop
    window_spike_triggered = window_spike_triggered_loop
    triangle_count_oriented = triangle_count_oriented_loop
else:
    w1_from_sorted = w1_from_sorted_vec
    burst_lengths = burst_lengths_vec
    window_count_triggered = window_count_triggered_vec
    window_sum_triggered = window_sum_triggered_vec
    window_distinct_triggered = window_distinct_triggered_vec
    window_spike_triggered = window_spike_triggered_vec
    triangle_count_oriented = triangle_count_oriented_vec

# name -> (vectorized, loop) pairs, used by tests and the benchmark
KERNEL_PAIRS = {
    "w1_from_sorted": (w1_from_sorted_vec, w1_from_sorted_loop),
    "burst_lengths": (burst_lengths_vec, burst_lengths_loop),
    "window_count_triggered": (window_count_triggered_vec, window_count_triggered_loop),
    "window_sum_triggered": (window_sum_triggered_vec, window_sum_triggered_loop),
    "window_distinct_triggered": (
        window_distinct_triggered_vec,
        window_distinct_triggered_loop,
    ),
    "window_spike_triggered": (window_spike_triggered_vec, window_spike_triggered_loop),
    "triangle_count_oriented": (triangle_count_oriented_vec, triangle_count_oriented_loop),
}
