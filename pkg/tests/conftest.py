"""Shared fixtures and independent brute-force oracles.

The oracles deliberately avoid the library's vectorized/accumulator code
paths: they loop over subjects and pooled time points directly, so a bug in
the production estimators cannot cancel out in the tests.
"""
import math

import numpy as np
import pytest


def random_censored_sample(rng, n=None, max_time=20, tie_heavy=False):
    """A random right-censored outcome list [(time, event), ...]."""
    if n is None:
        n = int(rng.integers(1, 51))
    if tie_heavy:
        times = rng.integers(1, 6, size=n).astype(float)
    else:
        times = rng.integers(1, max_time + 1, size=n).astype(float)
    events = rng.random(n) < 0.6
    return list(zip(times.tolist(), events.tolist()))


def oracle_risk_table(outcomes):
    """(event_times, at_risk, events) by direct counting."""
    times = np.array([t for t, _ in outcomes], dtype=float)
    events = np.array([bool(e) for _, e in outcomes])
    ev_times = sorted(set(times[events].tolist()))
    at_risk = [int(np.sum(times >= t)) for t in ev_times]
    d = [int(np.sum((times == t) & events)) for t in ev_times]
    return ev_times, at_risk, d


def oracle_km(outcomes, t):
    """Product-limit estimate S(t) by direct multiplication."""
    ev_times, at_risk, d = oracle_risk_table(outcomes)
    s = 1.0
    for ti, y, di in zip(ev_times, at_risk, d):
        if ti <= t:
            s *= 1.0 - di / y
    return s


def oracle_na(outcomes, t):
    """Nelson-Aalen H(t) by direct summation."""
    ev_times, at_risk, d = oracle_risk_table(outcomes)
    return sum(di / y for ti, y, di in zip(ev_times, at_risk, d) if ti <= t)


def oracle_logrank(left, right):
    """Two-group log-rank statistic from first principles."""
    pooled = list(left) + list(right)
    ev_times, _, _ = oracle_risk_table(pooled)
    if not ev_times:
        return 0.0
    lt = np.array([t for t, _ in left], dtype=float)
    le = np.array([bool(e) for _, e in left])
    pt = np.array([t for t, _ in pooled], dtype=float)
    pe = np.array([bool(e) for _, e in pooled])
    num = 0.0
    var = 0.0
    for t in ev_times:
        y = float(np.sum(pt >= t))
        d = float(np.sum((pt == t) & pe))
        yl = float(np.sum(lt >= t))
        dl = float(np.sum((lt == t) & le))
        num += dl - yl * d / y
        if y > 1.0:
            var += (yl / y) * (1.0 - yl / y) * ((y - d) / (y - 1.0)) * d
    if var <= 0.0:
        return 0.0
    return abs(num) / math.sqrt(var)


def oracle_concordance(risks, outcomes):
    """Harrell's C by exhaustive pair enumeration; None if no pair counts."""
    risks = list(risks)
    n = len(risks)
    num = 0.0
    pairs = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ti, ei = outcomes[i]
            tj, ej = outcomes[j]
            comparable = (ti < tj and ei) or (ti == tj and ei and not ej)
            if not comparable:
                continue
            pairs += 1
            if risks[i] > risks[j]:
                num += 1.0
            elif risks[i] == risks[j]:
                num += 0.5
    if pairs == 0:
        return None
    return num / pairs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
