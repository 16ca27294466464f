"""Pure-Python fallback for the log-rank split scanner.

Mirrors the loop structure and floating-point operation order of the
compiled scanner in ``_speedups.pyx`` exactly, so both backends return
bit-identical statistics and thresholds.
"""
from __future__ import annotations

import math


def best_split(values, times, events, ev_times, at_risk, n_events, min_samples_leaf):
    """Scan every midpoint threshold of one feature, sorted ascending.

    Parameters are the node's samples sorted by feature value plus the
    node-level pooled risk table. Returns ``(stat, threshold, found)`` for
    the best admissible split (both children >= min_samples_leaf), keeping
    the smallest threshold among ties.
    """
    values = values.tolist()
    times = times.tolist()
    events = events.tolist()
    ev_times_l = ev_times.tolist()
    at_risk_l = at_risk.tolist()
    n_events_l = n_events.tolist()
    n = len(values)
    m = len(ev_times_l)
    y_left = [0.0] * m
    d_left = [0.0] * m
    best_stat = 0.0
    best_thr = 0.0
    found = False
    for j in range(n - 1):
        t = times[j]
        lo, hi = 0, m
        while lo < hi:
            mid = (lo + hi) // 2
            if ev_times_l[mid] <= t:
                lo = mid + 1
            else:
                hi = mid
        for i in range(lo):
            y_left[i] += 1.0
        if events[j]:
            d_left[lo - 1] += 1.0
        if values[j] < values[j + 1]:
            if j + 1 >= min_samples_leaf and n - j - 1 >= min_samples_leaf:
                num = 0.0
                var = 0.0
                for i in range(m):
                    y = at_risk_l[i]
                    d = n_events_l[i]
                    yl = y_left[i]
                    dl = d_left[i]
                    num += dl - yl * d / y
                    if y > 1.0:
                        r = yl / y
                        var += r * (1.0 - r) * ((y - d) / (y - 1.0)) * d
                if var > 0.0:
                    stat = abs(num) / math.sqrt(var)
                else:
                    stat = 0.0
                if (not found) or stat > best_stat:
                    found = True
                    best_stat = stat
                    best_thr = (values[j] + values[j + 1]) / 2.0
    return best_stat, best_thr, found
