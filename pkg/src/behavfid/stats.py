"""Reusable statistical kernels and the marginal-similarity report.

``wasserstein1`` is the exact quantile-function integral between two
empirical distributions; for equal sample sizes it reduces to the mean
absolute difference of the sorted samples.  ``js_divergence`` uses base-2
logs so the value is bounded by 1.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from . import kernels
from .errors import InsufficientDataError
from .ingest import CATEGORICAL, NUMERIC, TransactionTable

JS_BINS = 32


def _as_sample(values: Sequence[float] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0:
        raise InsufficientDataError(f"empty sample: {name}")
    if not np.isfinite(arr).all():
        raise ValueError(f"sample {name} contains NaN or infinite values")
    return arr


def wasserstein1(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Exact empirical W1 via merged quantile breakpoints."""
    sa = np.sort(_as_sample(a, "a"))
    sb = np.sort(_as_sample(b, "b"))
    return float(kernels.w1_from_sorted(sa, sb))


def lag1_autocorr(iets: Sequence[float] | np.ndarray) -> float | None:
    """Pearson correlation of consecutive inter-event-time pairs.

    Returns None ("undefined") when fewer than 3 gaps are available or
    either shifted vector has zero variance.
    """
    arr = np.asarray(iets, dtype=np.float64)
    if arr.size < 3:
        return None
    x = arr[:-1]
    y = arr[1:]
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        return None
    return float((xc * yc).sum() / denom)


def js_divergence(p: Mapping[object, float], q: Mapping[object, float]) -> float:
    """Base-2 Jensen-Shannon divergence of two frequency maps.

    Frequencies are normalized; the union of supports is used.  Bounded in
    [0, 1]: 0 iff the normalized maps are equal, 1 iff supports are disjoint.
    """
    support = sorted(set(p) | set(q), key=str)
    if not support:
        raise InsufficientDataError("empty support")
    pv = np.array([float(p.get(k, 0.0)) for k in support])
    qv = np.array([float(q.get(k, 0.0)) for k in support])
    if (pv < 0).any() or (qv < 0).any():
        raise ValueError("frequencies must be nonnegative")
    if pv.sum() == 0 or qv.sum() == 0:
        raise InsufficientDataError("empty support")
    pv = pv / pv.sum()
    qv = qv / qv.sum()
    m = 0.5 * (pv + qv)

    def _kl(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    return 0.5 * _kl(pv) + 0.5 * _kl(qv)


def _usable_numeric_columns(a: TransactionTable, b: TransactionTable) -> list[str]:
    shared = [
        c
        for c in a.column_names
        if c in b.column_names and a.is_numeric(c) and b.is_numeric(c)
    ]
    usable = []
    for c in shared:
        va = a.numeric_values(c)
        vb = b.numeric_values(c)
        fa = va[np.isfinite(va)]
        fb = vb[np.isfinite(vb)]
        if fa.size < 2 or fb.size < 2:
            continue
        if np.ptp(fa) == 0.0 or np.ptp(fb) == 0.0:
            continue
        usable.append(c)
    return usable


def corr_matrix_delta(a: TransactionTable, b: TransactionTable) -> float:
    """Mean absolute difference of the two Pearson correlation matrices.

    Computed over shared numeric columns with nonzero variance on both
    sides, pairwise-complete observations, strictly-upper-triangle mean.
    """
    cols = _usable_numeric_columns(a, b)
    if len(cols) < 2:
        raise InsufficientDataError(
            f"need >= 2 usable shared numeric columns, found {len(cols)}"
        )
    ca = pd.DataFrame({c: a.numeric_values(c) for c in cols}).corr().to_numpy()
    cb = pd.DataFrame({c: b.numeric_values(c) for c in cols}).corr().to_numpy()
    iu = np.triu_indices(len(cols), k=1)
    diffs = np.abs(ca[iu] - cb[iu])
    diffs = diffs[np.isfinite(diffs)]
    if diffs.size == 0:
        raise InsufficientDataError("no defined correlation pairs")
    return float(diffs.mean())


def _freq_map(table: TransactionTable, col: str) -> dict[str, float]:
    codes = table.codes(col)
    vocab = table.vocab(col)
    counts = np.bincount(codes[codes >= 0], minlength=vocab.size)
    total = counts.sum()
    if total == 0:
        return {}
    return {str(vocab[i]): counts[i] / total for i in range(vocab.size) if counts[i]}


def _binned_freqs(values: np.ndarray, edges: np.ndarray) -> dict[int, float]:
    idx = np.searchsorted(edges, values, side="right")
    counts = np.bincount(idx, minlength=edges.size + 1)
    total = counts.sum()
    return {i: c / total for i, c in enumerate(counts) if c}


def quantile_bin_edges(values: np.ndarray, bins: int = JS_BINS) -> np.ndarray:
    """Interior equal-frequency bin edges fitted on one sample."""
    qs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    return np.unique(np.quantile(values, qs))


def layer1_report(
    a: TransactionTable, b: TransactionTable, bins: int = JS_BINS
) -> dict:
    """Column-wise marginal similarity between two tables.

    Categorical columns get a JS divergence; numeric columns get W1 plus a
    JS divergence over equal-frequency bins fitted on ``a`` (so a single
    all-column mean JS can be reported alongside the split JS/W1 view).
    The entity column is an identifier, not a feature, and is excluded.
    """
    skip = {a.schema.entity_col, b.schema.entity_col}
    shared = [
        c
        for c in a.column_names
        if c in b.column_names and c not in skip and a.kinds[c] == b.kinds[c]
    ]
    per_column: dict[str, dict] = {}
    js_all: list[float] = []
    js_cat: list[float] = []
    w1_num: list[float] = []
    for col in shared:
        if a.kinds[col] == CATEGORICAL:
            fa = _freq_map(a, col)
            fb = _freq_map(b, col)
            if not fa or not fb:
                per_column[col] = {"kind": CATEGORICAL, "js": None}
                continue
            js = js_divergence(fa, fb)
            per_column[col] = {"kind": CATEGORICAL, "js": js}
            js_all.append(js)
            js_cat.append(js)
        else:
            va = a.numeric_values(col)
            vb = b.numeric_values(col)
            fa = va[np.isfinite(va)]
            fb = vb[np.isfinite(vb)]
            if fa.size == 0 or fb.size == 0:
                per_column[col] = {"kind": NUMERIC, "w1": None, "js_binned": None}
                continue
            w1 = wasserstein1(fa, fb)
            edges = quantile_bin_edges(fa, bins)
            js = js_divergence(_binned_freqs(fa, edges), _binned_freqs(fb, edges))
            per_column[col] = {"kind": NUMERIC, "w1": w1, "js_binned": js}
            js_all.append(js)
            w1_num.append(w1)

    try:
        corr_delta = corr_matrix_delta(a, b)
    except InsufficientDataError:
        corr_delta = None

    rate_a = a.fraud_rate()
    rate_b = b.fraud_rate()
    if rate_a > 0 and rate_b > 0:
        rate_ratio = max(rate_a, rate_b) / min(rate_a, rate_b)
    elif rate_a == rate_b:
        rate_ratio = 1.0
    else:
        rate_ratio = None  # one side has no fraud at all

    return {
        "per_column": per_column,
        "mean_js_all_columns": float(np.mean(js_all)) if js_all else None,
        "mean_js_categorical": float(np.mean(js_cat)) if js_cat else None,
        "mean_w1_numeric": float(np.mean(w1_num)) if w1_num else None,
        "corr_matrix_delta": corr_delta,
        "fraud_rate_real": rate_a,
        "fraud_rate_syn": rate_b,
        "fraud_rate_ratio": rate_ratio,
        "fraud_rate_flagged": bool(rate_ratio is None or rate_ratio >= 2.0),
    }
