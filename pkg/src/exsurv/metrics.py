"""Censoring-aware evaluation: Harrell's C-index, IPCW time-dependent
AUC (cumulative cases / dynamic controls), and the IPCW Brier score with
its trapezoidal integral (IBS).

The censoring survival function G is evaluated with left limits at event
times so a patient never weights itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .survcore import SurvivalCurve, censoring_distribution


class MetricError(ValueError):
    pass


@dataclass
class ConcordanceResult:
    c_index: float
    concordant: int
    discordant: int
    tied_risk: int
    comparable: int


@dataclass
class TimeAUC:
    horizon: float
    auc: float | None
    n_cases: int
    n_controls: int

    @property
    def defined(self) -> bool:
        return self.auc is not None


@dataclass
class BrierResult:
    grid: np.ndarray
    brier: np.ndarray
    ibs: float


def harrell_cindex(risks, times, events) -> ConcordanceResult:
    """Harrell's concordance over comparable pairs.

    A pair is comparable iff the member with the strictly earlier observed
    time had an event; concordant iff that member carries the higher risk;
    risk ties count one half.
    """
    risks = np.asarray(risks, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if not risks.shape == times.shape == events.shape:
        raise MetricError("risks/times/events length mismatch")
    conc = disc = tied = 0
    n = risks.size
    for i in range(n):
        if not events[i]:
            continue
        later = times > times[i]
        conc += int(np.sum(risks[later] < risks[i]))
        disc += int(np.sum(risks[later] > risks[i]))
        tied += int(np.sum(risks[later] == risks[i]))
    comparable = conc + disc + tied
    if comparable == 0:
        raise MetricError("no comparable pairs")
    return ConcordanceResult((conc + 0.5 * tied) / comparable, conc, disc, tied, comparable)


def _censor_curve(times, events, censor_g=None) -> SurvivalCurve:
    return censor_g if censor_g is not None else censoring_distribution(times, events)


def _g_left(g: SurvivalCurve, t):
    val = g.left_limit(t)
    return val


def time_dependent_auc(risks, times, events, horizon, censor_g=None) -> TimeAUC:
    """IPCW cumulative/dynamic AUC at one horizon (Uno-style).

    Cases: event by the horizon, weighted 1/G(T_i-). Controls: observed
    past the horizon, unweighted (the constant 1/G(t) control weight
    cancels). Patients censored before the horizon are excluded. Undefined
    (auc=None) when either side is empty.
    """
    risks = np.asarray(risks, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    g = _censor_curve(times, events, censor_g)
    cases = events & (times <= horizon)
    controls = times > horizon
    n_cases, n_controls = int(cases.sum()), int(controls.sum())
    if n_cases == 0 or n_controls == 0:
        return TimeAUC(float(horizon), None, n_cases, n_controls)
    gw = _g_left(g, times[cases])
    if np.any(gw <= 0):
        raise MetricError(f"censoring survival hits 0 before horizon {horizon}")
    w = 1.0 / np.asarray(gw, dtype=float)
    rc = risks[cases][:, None]
    rk = risks[controls][None, :]
    wins = (rc > rk) + 0.5 * (rc == rk)
    auc = float((w[:, None] * wins).sum() / (w.sum() * n_controls))
    return TimeAUC(float(horizon), auc, n_cases, n_controls)


def auc_curve(risks, times, events, grid, censor_g=None) -> list[TimeAUC]:
    g = _censor_curve(times, events, censor_g)
    return [time_dependent_auc(risks, times, events, t, censor_g=g) for t in grid]


def brier_ibs(surv_probs, times, events, grid, censor_g=None) -> BrierResult:
    """IPCW Brier score on a grid plus its trapezoidal average.

    ``surv_probs``: (n, len(grid)) matrix, S_i evaluated at each grid
    point. Weights: deaths by t get 1/G(T_i-), survivors past t get
    1/G(t), censored-by-t rows 0.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    grid = np.asarray(grid, dtype=float)
    S = np.asarray(surv_probs, dtype=float)
    if S.shape != (times.size, grid.size):
        raise MetricError(f"surv_probs shape {S.shape} != ({times.size}, {grid.size})")
    g = _censor_curve(times, events, censor_g)
    n = times.size
    g_at_event = np.asarray(_g_left(g, times), dtype=float)
    brier = np.empty(grid.size)
    for k, t in enumerate(grid):
        died = events & (times <= t)
        alive = times > t
        if np.any(died & (g_at_event <= 0)):
            raise MetricError(f"G left limit is 0 at an event time needed for t={t}")
        g_t = g(t)
        if np.any(alive) and g_t <= 0:
            raise MetricError(f"censoring survival is 0 at grid time t={t}")
        s = S[:, k]
        term = np.zeros(n)
        term[died] = (s[died] ** 2) / g_at_event[died]
        term[alive] = ((1.0 - s[alive]) ** 2) / g_t
        brier[k] = term.sum() / n
    if grid.size > 1:
        span = grid[-1] - grid[0]
        ibs = float(np.trapezoid(brier, grid) / span) if span > 0 else float(brier[0])
    else:
        ibs = float(brier[0])
    return BrierResult(grid, brier, ibs)


def default_grid(times, events, upper=None) -> np.ndarray:
    """Unique event times clipped to [first event, last event] (and upper)."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    ts = np.unique(times[events])
    if upper is not None:
        ts = ts[ts <= upper]
    if ts.size == 0:
        raise MetricError("no event times in range")
    return ts
