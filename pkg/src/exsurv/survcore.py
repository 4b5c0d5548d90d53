"""Nonparametric survival estimators and the two-sample log-rank test.

Everything here operates on right-censored outcomes given as parallel
arrays of observation times and event flags (1 = death observed,
0 = censored). Ties between a death and a censoring at the same time are
resolved by processing deaths first: the censored individual is still in
the risk set at that instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


@dataclass
class StepFunction:
    """Right-continuous step function over positive breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray
    value_before_first: float = 0.0

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.breakpoints.ndim != 1 or self.values.shape != self.breakpoints.shape:
            raise ValueError("breakpoints and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        out = np.where(idx < 0, self.value_before_first, self.values[np.clip(idx, 0, None)])
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        """Value just before t, i.e. evaluation on [.., t)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="left") - 1
        out = np.where(idx < 0, self.value_before_first, self.values[np.clip(idx, 0, None)])
        return float(out) if out.ndim == 0 else out

    def to_pairs(self):
        return [(float(t), float(v)) for t, v in zip(self.breakpoints, self.values)]


@dataclass
class SurvivalCurve(StepFunction):
    """Step function constrained to start at 1 and never increase."""

    std_errors: np.ndarray | None = None  # Greenwood standard errors, same shape as values

    def __post_init__(self):
        self.value_before_first = 1.0
        super().__post_init__()
        if np.any(self.values > 1.0 + 1e-12) or np.any(self.values < -1e-12):
            raise ValueError("survival values must lie in [0, 1]")
        if np.any(np.diff(self.values) > 1e-12):
            raise ValueError("survival curve must be non-increasing")

    def export(self):
        """JSON-ready list of (t, value, greenwood_se) points."""
        se = self.std_errors if self.std_errors is not None else np.zeros_like(self.values)
        return [
            {"t": float(t), "value": float(v), "se": float(s)}
            for t, v, s in zip(self.breakpoints, self.values, se)
        ]


@dataclass
class LogRankResult:
    statistic: float
    p_value: float
    observed: tuple[float, float]
    expected: tuple[float, float]
    degenerate: bool = False


def _validate(times, events):
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if times.size == 0:
        raise ValueError("empty outcome list")
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    if np.any(times <= 0):
        raise ValueError("observation times must be positive")
    return times, events


def _risk_table(times, events):
    """Unique times with death counts, censor counts, and at-risk counts."""
    order = np.argsort(times, kind="stable")
    t = times[order]
    e = events[order]
    uniq, start = np.unique(t, return_index=True)
    d = np.add.reduceat(e.astype(int), start)
    total = np.add.reduceat(np.ones_like(e, dtype=int), start)
    # at risk just before each unique time
    n_at_risk = times.size - np.concatenate([[0], np.cumsum(total)[:-1]])
    return uniq, d, total - d, n_at_risk


def kaplan_meier(times, events) -> SurvivalCurve:
    """Product-limit estimate of the survival function.

    Censored-only times do not create drops but the curve carries a
    breakpoint there so exports show the full risk history is optional;
    only death times appear as breakpoints.
    """
    times, events = _validate(times, events)
    uniq, d, _, n = _risk_table(times, events)
    keep = d > 0
    if not np.any(keep):
        return SurvivalCurve(np.array([np.max(times)]), np.array([1.0]),
                             std_errors=np.array([0.0]))
    td, dd, nd = uniq[keep], d[keep], n[keep]
    surv = np.cumprod(1.0 - dd / nd)
    # Greenwood: var(S) = S^2 * cumsum(d / (n (n - d)))
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = np.where(nd > dd, dd / (nd * (nd - dd)), 0.0)
    se = surv * np.sqrt(np.cumsum(inc))
    return SurvivalCurve(td, surv, std_errors=se)


def nelson_aalen(times, events) -> StepFunction:
    """Cumulative-hazard estimate H(t) = sum over event times of d_i / n_i."""
    times, events = _validate(times, events)
    uniq, d, _, n = _risk_table(times, events)
    keep = d > 0
    if not np.any(keep):
        return StepFunction(np.array([np.max(times)]), np.array([0.0]))
    return StepFunction(uniq[keep], np.cumsum(d[keep] / n[keep]))


def censoring_distribution(times, events) -> SurvivalCurve:
    """Kaplan-Meier of the censoring process (event flags inverted).

    Used as G(t) in IPCW weights.
    """
    times, events = _validate(times, events)
    return kaplan_meier(times, ~events)


def log_rank_test(times_a, events_a, times_b, events_b) -> LogRankResult:
    """Two-sample log-rank test with hypergeometric variance.

    Zero pooled variance (no events, or full overlap at a single event
    time) yields statistic 0, p = 1, flagged degenerate.
    """
    ta, ea = _validate(times_a, events_a)
    tb, eb = _validate(times_b, events_b)
    if not (np.any(ea) or np.any(eb)):
        raise ValueError("log-rank test requires at least one event")
    times = np.concatenate([ta, tb])
    events = np.concatenate([ea, eb])
    group = np.concatenate([np.zeros(ta.size, dtype=bool), np.ones(tb.size, dtype=bool)])

    stat_num, var, o_a, e_a = _log_rank_terms(times, events, group)
    o_b = float(np.sum(eb))
    e_b = (o_a + o_b) - e_a
    if var <= 0:
        return LogRankResult(0.0, 1.0, (o_a, o_b), (e_a, e_b), degenerate=True)
    chi2 = stat_num**2 / var
    p = float(stats.chi2.sf(chi2, df=1))
    return LogRankResult(float(chi2), p, (o_a, o_b), (e_a, e_b))


def _log_rank_terms(times, events, group_b_mask):
    """(O_A - E_A, hypergeometric variance, O_A, E_A) over pooled event times."""
    uniq = np.unique(times[events])
    num = 0.0
    var = 0.0
    obs_a = 0.0
    exp_a = 0.0
    for t in uniq:
        at_risk = times >= t
        n = np.count_nonzero(at_risk)
        n_a = np.count_nonzero(at_risk & ~group_b_mask)
        dead = events & (times == t)
        d = np.count_nonzero(dead)
        d_a = np.count_nonzero(dead & ~group_b_mask)
        obs_a += d_a
        e = d * n_a / n
        exp_a += e
        num += d_a - e
        if n > 1:
            var += (n_a / n) * (1 - n_a / n) * d * (n - d) / (n - 1)
    return num, var, obs_a, exp_a
