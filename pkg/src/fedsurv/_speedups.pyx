# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled log-rank split scanner.

Keep the floating-point operation order in sync with ``_split_py.py``:
the pure-Python fallback must return bit-identical results.
"""
from libc.math cimport fabs, sqrt

import numpy as np


def best_split(double[::1] values, double[::1] times, unsigned char[::1] events,
               double[::1] ev_times, double[::1] at_risk, double[::1] n_events,
               Py_ssize_t min_samples_leaf):
    """Scan every midpoint threshold of one feature, sorted ascending.

    Returns ``(stat, threshold, found)`` for the best admissible split,
    keeping the smallest threshold among ties.
    """
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = ev_times.shape[0]
    cdef double[::1] y_left = np.zeros(m, dtype=np.float64)
    cdef double[::1] d_left = np.zeros(m, dtype=np.float64)
    cdef double best_stat = 0.0, best_thr = 0.0
    cdef bint found = False
    cdef Py_ssize_t j, i, lo, hi, mid
    cdef double t, num, var, y, d, yl, dl, r, stat
    for j in range(n - 1):
        t = times[j]
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if ev_times[mid] <= t:
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
                    y = at_risk[i]
                    d = n_events[i]
                    yl = y_left[i]
                    dl = d_left[i]
                    num += dl - yl * d / y
                    if y > 1.0:
                        r = yl / y
                        var += r * (1.0 - r) * ((y - d) / (y - 1.0)) * d
                if var > 0.0:
                    stat = fabs(num) / sqrt(var)
                else:
                    stat = 0.0
                if (not found) or stat > best_stat:
                    found = True
                    best_stat = stat
                    best_thr = (values[j] + values[j + 1]) / 2.0
    return best_stat, best_thr, found
