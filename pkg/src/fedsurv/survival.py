"""Censoring-aware estimators and metrics for right-censored time-to-event data.

Everything in this module is a pure function over immutable inputs: risk
tables, Kaplan-Meier and Nelson-Aalen step estimates, the two-group log-rank
statistic used for tree splitting, and Harrell's concordance index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class SurvivalOutcome(NamedTuple):
    """One subject: observed time and whether the event was observed.

    ``event=False`` means the subject is right-censored at ``time``.
    """

    time: float
    event: bool


def outcome_arrays(outcomes: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Convert an outcome sequence to ``(times, events)`` float/bool arrays.

    Accepts SurvivalOutcome instances, plain ``(time, event)`` pairs, or a
    pre-split ``(times, events)`` array pair.
    """
    if isinstance(outcomes, tuple) and len(outcomes) == 2 and np.ndim(outcomes[0]) == 1:
        times = np.asarray(outcomes[0], dtype=np.float64)
        events = np.asarray(outcomes[1], dtype=bool)
    else:
        pairs = list(outcomes)
        times = np.array([p[0] for p in pairs], dtype=np.float64)
        events = np.array([bool(p[1]) for p in pairs], dtype=bool)
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    if times.size and (not np.all(np.isfinite(times)) or np.any(times <= 0)):
        raise ValueError("survival times must be positive and finite")
    return times, events


@dataclass(frozen=True)
class RiskTable:
    """Distinct event times with at-risk and event counts.

    ``at_risk[i]`` counts subjects with time >= ``event_times[i]``;
    ``events[i]`` counts events at exactly ``event_times[i]``. Subjects
    censored at t are still at risk for events at t.
    """

    event_times: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: value_before_first left of the grid,
    then ``values[j]`` for the largest ``times[j] <= t``."""

    times: np.ndarray
    values: np.ndarray
    value_before_first: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        times = np.asarray(self.times, dtype=np.float64)
        if times.size == 0:
            out = np.full(t.shape, self.value_before_first)
        else:
            idx = np.searchsorted(times, t, side="right")
            out = np.where(
                idx == 0,
                self.value_before_first,
                np.asarray(self.values, dtype=np.float64)[np.maximum(idx - 1, 0)],
            )
        if out.ndim == 0:
            return float(out)
        return out


def risk_table_from_arrays(times: np.ndarray, events: np.ndarray) -> RiskTable:
    """Risk table over the samples given as parallel arrays."""
    if times.size == 0:
        raise ValueError("empty cohort")
    order = np.argsort(times, kind="stable")
    ts = times[order]
    es = events[order]
    event_times = np.unique(ts[es])
    if event_times.size == 0:
        empty = np.empty(0, dtype=np.float64)
        return RiskTable(empty, empty.copy(), empty.copy())
    at_risk = (ts.size - np.searchsorted(ts, event_times, side="left")).astype(np.float64)
    # events at exactly each event time
    counts = np.zeros(event_times.size, dtype=np.float64)
    idx = np.searchsorted(event_times, ts[es])
    np.add.at(counts, idx, 1.0)
    return RiskTable(event_times.astype(np.float64), at_risk, counts)


def build_risk_table(outcomes) -> RiskTable:
    """Risk table (event times, at-risk counts, event counts) for a cohort."""
    times, events = outcome_arrays(outcomes)
    return risk_table_from_arrays(times, events)


def kaplan_meier(outcomes) -> StepFunction:
    """Product-limit survival estimate S(t) = prod_{t_i <= t} (1 - d_i / Y_i)."""
    table = build_risk_table(outcomes)
    values = np.cumprod(1.0 - table.events / table.at_risk) if table.event_times.size else np.empty(0)
    return StepFunction(table.event_times, values, 1.0)


def nelson_aalen(outcomes) -> StepFunction:
    """Cumulative hazard estimate H(t) = sum_{t_i <= t} d_i / Y_i."""
    table = build_risk_table(outcomes)
    values = np.cumsum(table.events / table.at_risk) if table.event_times.size else np.empty(0)
    return StepFunction(table.event_times, values, 0.0)


def km_na_from_arrays(times: np.ndarray, events: np.ndarray):
    """(event_time_grid, cumulative_hazard, survival) for one node's samples."""
    table = risk_table_from_arrays(times, events)
    if table.event_times.size == 0:
        empty = np.empty(0, dtype=np.float64)
        return table.event_times, empty, empty.copy()
    hazard = table.events / table.at_risk
    return table.event_times, np.cumsum(hazard), np.cumprod(1.0 - hazard)


def logrank_accumulate(at_risk, n_events, at_risk_left, events_left) -> float:
    """Standardized log-rank statistic from per-event-time counts.

    The accumulation order and expression shapes are shared verbatim with the
    compiled split scanner so both produce bit-identical values.
    """
    num = 0.0
    var = 0.0
    for i in range(len(at_risk)):
        y = float(at_risk[i])
        d = float(n_events[i])
        y_left = float(at_risk_left[i])
        d_left = float(events_left[i])
        num += d_left - y_left * d / y
        if y > 1.0:
            r = y_left / y
            var += r * (1.0 - r) * ((y - d) / (y - 1.0)) * d
    if var > 0.0:
        return abs(num) / math.sqrt(var)
    return 0.0


def logrank_statistic(left, right) -> float:
    """Two-group log-rank statistic |N| / sqrt(V) over pooled event times.

    Returns 0 when the hypergeometric variance is 0 (no discriminating
    events). Symmetric in its arguments.
    """
    lt, le = outcome_arrays(left)
    rt, re_ = outcome_arrays(right)
    if lt.size == 0 or rt.size == 0:
        raise ValueError("degenerate split")
    times = np.concatenate([lt, rt])
    events = np.concatenate([le, re_])
    table = risk_table_from_arrays(times, events)
    if table.event_times.size == 0:
        return 0.0
    order = np.argsort(lt, kind="stable")
    lt_sorted = lt[order]
    le_sorted = le[order]
    at_risk_left = (lt.size - np.searchsorted(lt_sorted, table.event_times, side="left")).astype(np.float64)
    events_left = np.zeros(table.event_times.size, dtype=np.float64)
    ev = lt_sorted[le_sorted]
    np.add.at(events_left, np.searchsorted(table.event_times, ev), 1.0)
    return logrank_accumulate(table.at_risk, table.events, at_risk_left, events_left)


def concordance_index(risk: Sequence[float], outcomes) -> float:
    """Harrell's C-index over comparable pairs, with 0.5 credit for risk ties.

    Comparable pairs: (i, j) with ``time_i < time_j`` and ``event_i``, or
    tied times with exactly one event (the event subject should carry the
    higher risk). Raises when no pair is comparable, which is distinct from
    a chance-level score of 0.5.
    """
    times, events = outcome_arrays(outcomes)
    r = np.asarray(risk, dtype=np.float64)
    if r.shape != times.shape:
        raise ValueError("risk and outcomes must have equal length")
    ti = times[:, None]
    tj = times[None, :]
    ei = events[:, None]
    ri = r[:, None]
    rj = r[None, :]
    comparable = (ti < tj) & ei
    comparable |= (ti == tj) & ei & ~events[None, :]
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise ValueError("no comparable pairs")
    score = np.where(ri > rj, 1.0, np.where(ri == rj, 0.5, 0.0))
    return float(score[comparable].sum() / n_pairs)


def n_comparable_pairs(outcomes) -> int:
    """Number of comparable pairs used by :func:`concordance_index`."""
    times, events = outcome_arrays(outcomes)
    ti = times[:, None]
    tj = times[None, :]
    ei = events[:, None]
    comparable = (ti < tj) & ei
    comparable |= (ti == tj) & ei & ~events[None, :]
    return int(comparable.sum())
