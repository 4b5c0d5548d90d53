"""Ridge-penalized Cox proportional hazards, Breslow ties and baseline.

Maximizes the Breslow partial log-likelihood minus lambda * ||beta||^2 by
Newton's method with step halving. The objective, gradient, and Hessian
are exposed separately so tests can compare against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..survcore import StepFunction, SurvivalCurve


class CoxConvergenceError(RuntimeError):
    def __init__(self, msg, beta, grad_norm):
        super().__init__(msg)
        self.beta = beta
        self.grad_norm = grad_norm


@dataclass
class CoxRidgeModel:
    beta: np.ndarray
    lam: float
    baseline_hazard: StepFunction  # Breslow cumulative hazard H0
    feature_names: list[str] = field(default_factory=list)
    n_iter: int = 0
    final_grad_norm: float = 0.0
    standard_errors: np.ndarray | None = None

    def predict_risk(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.beta.shape:
            raise ValueError(f"expected {self.beta.size} features, got {x.size}")
        return float(self.beta @ x)

    def predict_survival(self, x) -> SurvivalCurve:
        lp = self.predict_risk(x)
        h0 = self.baseline_hazard
        surv = np.exp(-h0.values * np.exp(lp))
        return SurvivalCurve(h0.breakpoints, np.minimum.accumulate(np.clip(surv, 0, 1)))

    def predict(self, x):
        return self.predict_risk(x), self.predict_survival(x)

    def predict_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return [self.predict(row) for row in X]

    def risk_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.beta.size:
            raise ValueError("dimension mismatch")
        return X @ self.beta

    def survival_matrix(self, X, grid) -> np.ndarray:
        """S_i(t) on a grid, one row per input row."""
        lp = self.risk_batch(X)
        h0 = np.asarray(self.baseline_hazard(np.asarray(grid, dtype=float)))
        return np.exp(-np.outer(np.exp(lp), h0))


def penalized_loglik(beta, X, times, events, lam):
    """Breslow partial log-likelihood minus lam * ||beta||^2."""
    ll, _, _ = _pll_internals(beta, X, times, events, want_grad=False)
    return ll - lam * float(beta @ beta)


def penalized_gradient(beta, X, times, events, lam):
    _, grad, _ = _pll_internals(beta, X, times, events, want_grad=True)
    return grad - 2.0 * lam * beta


def penalized_hessian(beta, X, times, events, lam):
    _, _, hess = _pll_internals(beta, X, times, events, want_grad=True, want_hess=True)
    return hess - 2.0 * lam * np.eye(beta.size)


def _pll_internals(beta, X, times, events, want_grad=True, want_hess=False):
    """Breslow log-likelihood and derivatives via descending-time prefix sums."""
    n, p = X.shape
    order = np.argsort(-times, kind="stable")
    Xs, ts, es = X[order], times[order], events[order]
    eta = Xs @ beta
    w = np.exp(eta)
    cw = np.cumsum(w)                      # sum of w over risk set {T >= ts[i]}
    cwx = np.cumsum(w[:, None] * Xs, axis=0)
    # risk-set sums must be taken at the last index sharing the same time
    uniq, inv = np.unique(-ts, return_inverse=True)
    last_idx = np.zeros(uniq.size, dtype=int)
    np.maximum.at(last_idx, inv, np.arange(n))
    rs = last_idx[inv]                     # per-row index of its risk-set boundary

    ev = np.flatnonzero(es)
    denom = cw[rs[ev]]
    ll = float(np.sum(eta[ev]) - np.sum(np.log(denom)))
    grad = hess = None
    if want_grad:
        xbar = cwx[rs[ev]] / denom[:, None]
        grad = Xs[ev].sum(axis=0) - xbar.sum(axis=0)
    if want_hess:
        hess = np.zeros((p, p))
        # group events by unique event time to reuse the risk-set moment
        cwxx = np.cumsum(w[:, None, None] * (Xs[:, :, None] * Xs[:, None, :]), axis=0)
        uniq_ev, first = np.unique(rs[ev], return_index=True)
        counts = np.diff(np.append(first, ev.size))
        for b, d in zip(uniq_ev, counts):
            s0 = cw[b]
            s1 = cwx[b] / s0
            s2 = cwxx[b] / s0
            hess -= d * (s2 - np.outer(s1, s1))
    return ll, grad, hess


def fit_cox_ridge(X, times, events, lam=0.0, feature_names=None, max_iter=100,
                  tol=1e-8, max_halvings=20) -> CoxRidgeModel:
    """Newton fit with step halving; converges when the penalized gradient
    infinity-norm drops below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    n, p = X.shape
    if n < 2 or not np.any(events):
        raise ValueError("need at least two rows and one event")
    if np.any(np.isnan(X)):
        raise ValueError("design matrix contains missing values")

    beta = np.zeros(p)
    obj = penalized_loglik(beta, X, times, events, lam)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        grad = penalized_gradient(beta, X, times, events, lam)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            break
        hess = penalized_hessian(beta, X, times, events, lam)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad / (np.abs(np.diag(hess)).max() + 1.0)
        # step halving keeps the penalized log-likelihood non-decreasing
        scale = 1.0
        for _ in range(max_halvings + 1):
            new_beta = beta + scale * step
            new_obj = penalized_loglik(new_beta, X, times, events, lam)
            if new_obj >= obj - 1e-12:
                break
            scale *= 0.5
        else:
            raise CoxConvergenceError("step halving failed to improve the objective",
                                      beta, gnorm)
        beta, obj = new_beta, new_obj
    else:
        grad = penalized_gradient(beta, X, times, events, lam)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm >= tol:
            raise CoxConvergenceError(
                f"Newton did not converge in {max_iter} iterations "
                f"(grad inf-norm {gnorm:.3e})", beta, gnorm)

    grad = penalized_gradient(beta, X, times, events, lam)
    hess = penalized_hessian(beta, X, times, events, lam)
    try:
        cov = np.linalg.inv(-hess)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        se = None

    h0 = breslow_baseline(beta, X, times, events)
    names = list(feature_names) if feature_names else [f"x{j}" for j in range(p)]
    return CoxRidgeModel(beta, float(lam), h0, names, n_iter,
                         float(np.max(np.abs(grad))), se)


def breslow_baseline(beta, X, times, events) -> StepFunction:
    """Breslow estimate of the baseline cumulative hazard."""
    X = np.asarray(X, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    w = np.exp(X @ beta)
    ev_times = np.unique(times[events])
    increments = np.empty(ev_times.size)
    for k, t in enumerate(ev_times):
        d = int(np.sum(events & (times == t)))
        increments[k] = d / float(np.sum(w[times >= t]))
    return StepFunction(ev_times, np.cumsum(increments))


def cox_wald_pvalue(X, times, events, lam=0.0) -> float:
    """Two-sided Wald p-value for a single-feature Cox fit."""
    model = fit_cox_ridge(np.asarray(X, dtype=float).reshape(-1, 1), times, events, lam=lam)
    if model.standard_errors is None or model.standard_errors[0] == 0:
        return 1.0
    z = model.beta[0] / model.standard_errors[0]
    return float(2.0 * stats.norm.sf(abs(z)))
