"""Paired two-sided tests over per-run C-index deltas.

Wilcoxon signed-rank: zeros dropped, average ranks for tied magnitudes,
exact enumeration up to n=25 and a tie-corrected normal approximation
beyond. All-zero deltas give p = 1.0 by convention for both tests.
"""
from __future__ import annotations

import numpy as np
from scipy import stats as sps


def _exact_wilcoxon_p(ranks: np.ndarray, w_plus: float) -> float:
    # Doubled ranks are integers even with average ranks; build the exact
    # distribution of 2*W+ over all sign assignments by convolution.
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    counts /= counts.sum()
    w2 = int(round(2.0 * w_plus))
    p_low = counts[: w2 + 1].sum()
    p_high = counts[w2:].sum()
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def wilcoxon_signed_rank(deltas) -> float:
    """Two-sided signed-rank p-value for paired differences."""
    d = np.asarray(deltas, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least two deltas")
    d = d[d != 0.0]
    if d.size == 0:
        return 1.0
    ranks = sps.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    n = d.size
    if n <= 25:
        return _exact_wilcoxon_p(ranks, w_plus)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= (tie_counts**3 - tie_counts).sum() / 48.0
    if var <= 0.0:
        return 1.0
    z = (w_plus - mean) / np.sqrt(var)
    return float(min(1.0, 2.0 * sps.norm.sf(abs(z))))


def paired_t(deltas) -> float:
    """Two-sided one-sample t-test p-value on the deltas."""
    d = np.asarray(deltas, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least two deltas")
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0
    t = d.mean() / (sd / np.sqrt(d.size))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), df=d.size - 1)))
