"""Kernel SHAP against a background sample, plus the derived views:
global mean-|phi| importance, sign-change thresholds, waterfall data, and
median-split risk-group analysis.

Absent features are marginalized interventionally: a coalition point is
averaged over background rows with the missing coordinates replaced.
With p <= 12 features all 2^p coalitions are enumerated, which recovers
exact Shapley values; above that, paired coalition sampling with a budget
feeds the same constrained weighted-least-squares solve. Local accuracy
(base + sum(phi) = f(x)) holds in both modes by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .survcore import kaplan_meier, log_rank_test

EXACT_ENUMERATION_LIMIT = 12
DEFAULT_SAMPLING_BUDGET = 2048


@dataclass
class ShapExplanation:
    base_value: float
    phi: np.ndarray
    prediction: float
    feature_names: list[str]
    feature_values: np.ndarray  # original scale, for display

    def residual(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.prediction)

    def to_dict(self, horizon_days=None):
        d = {
            "base": self.base_value,
            "prediction": self.prediction,
            "phi": [
                {"feature": n, "value_original_scale": float(v), "phi": float(p)}
                for n, v, p in zip(self.feature_names, self.feature_values, self.phi)
            ],
        }
        if horizon_days is not None:
            d["horizon_days"] = horizon_days
        return d


def _coalition_matrix_exact(p: int):
    """All coalitions with 0 < |z| < p plus Shapley kernel weights."""
    rows, weights = [], []
    for size in range(1, p):
        w = (p - 1) / (math.comb(p, size) * size * (p - size))
        for combo in combinations(range(p), size):
            z = np.zeros(p)
            z[list(combo)] = 1.0
            rows.append(z)
            weights.append(w)
    return np.array(rows), np.array(weights)


def _coalition_matrix_sampled(p: int, budget: int, rng):
    """Paired coalition sampling: sizes drawn from the kernel-weight
    distribution, each subset emitted with its complement."""
    sizes = np.arange(1, p)
    size_w = np.array([(p - 1) / (s * (p - s)) for s in sizes])
    size_w = size_w / size_w.sum()
    rows = []
    n_pairs = max(budget // 2, 1)
    for _ in range(n_pairs):
        s = int(rng.choice(sizes, p=size_w))
        combo = rng.choice(p, size=s, replace=False)
        z = np.zeros(p)
        z[combo] = 1.0
        rows.append(z)
        rows.append(1.0 - z)
    Z = np.array(rows)
    weights = np.ones(Z.shape[0])  # size bias already carried by the draw
    return Z, weights


def _coalition_values(f, x, Z, background, chunk_rows: int = 200_000):
    """E_b[f(z*x + (1-z)*b)] per coalition row, averaged over background."""
    x = np.asarray(x, dtype=float)
    B = np.atleast_2d(np.asarray(background, dtype=float))
    nb = B.shape[0]
    out = np.empty(Z.shape[0])
    per = max(1, chunk_rows // nb)
    for s in range(0, Z.shape[0], per):
        zs = Z[s:s + per]
        synth = np.where(zs[:, None, :] == 1.0, x[None, None, :], B[None, :, :])
        vals = np.asarray(f(synth.reshape(-1, x.size)), dtype=float)
        out[s:s + zs.shape[0]] = vals.reshape(zs.shape[0], nb).mean(axis=1)
    return out


def _solve_constrained_wls(Z, w, vals, base, fx):
    """Weighted least squares with the local-accuracy constraint
    sum(phi) = fx - base folded in by eliminating the last coefficient."""
    p = Z.shape[1]
    gap = fx - base
    y = vals - base - Z[:, -1] * gap
    A = Z[:, :-1] - Z[:, [-1]]
    Aw = A * w[:, None]
    lhs = Aw.T @ A
    rhs = Aw.T @ y
    phi_head, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    phi = np.empty(p)
    phi[:-1] = phi_head
    phi[-1] = gap - phi_head.sum()
    return phi


def kernel_shap(f, x, background, feature_names=None, seed: int = 0,
                budget: int = DEFAULT_SAMPLING_BUDGET,
                display_values=None) -> ShapExplanation:
    """Additive attribution of f(x) against the background distribution.

    ``f`` must accept a 2-D array and return one output per row. Exact
    enumeration is used for p <= 12 features (seed-independent); larger
    p uses paired coalition sampling with ``budget`` coalitions.
    """
    x = np.asarray(x, dtype=float).ravel()
    B = np.atleast_2d(np.asarray(background, dtype=float))
    if B.shape[0] == 0:
        raise ValueError("background must be non-empty")
    if B.shape[1] != x.size:
        raise ValueError("background width does not match x")
    p = x.size
    base = float(np.mean(np.asarray(f(B), dtype=float)))
    fx = float(np.asarray(f(x.reshape(1, -1)), dtype=float)[0])

    if p == 1:
        phi = np.array([fx - base])
    else:
        if p <= EXACT_ENUMERATION_LIMIT:
            Z, w = _coalition_matrix_exact(p)
        else:
            rng = np.random.default_rng(seed)
            Z, w = _coalition_matrix_sampled(p, budget, rng)
        vals = _coalition_values(f, x, Z, B)
        phi = _solve_constrained_wls(Z, w, vals, base, fx)

    names = list(feature_names) if feature_names else [f"x{j}" for j in range(p)]
    shown = np.asarray(display_values, dtype=float) if display_values is not None else x
    return ShapExplanation(base, phi, fx, names, shown)


def explain_population(f, rows, background, feature_names=None, seed: int = 0,
                       budget: int = DEFAULT_SAMPLING_BUDGET,
                       display_rows=None) -> list[ShapExplanation]:
    """Elementwise kernel_shap with per-row seeds derived from the master
    seed by row index."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    seeds = np.random.SeedSequence(seed).generate_state(max(rows.shape[0], 1))
    out = []
    for i, row in enumerate(rows):
        shown = display_rows[i] if display_rows is not None else None
        try:
            out.append(kernel_shap(f, row, background, feature_names,
                                   seed=int(seeds[i]), budget=budget,
                                   display_values=shown))
        except Exception as exc:
            raise RuntimeError(f"explanation failed for row {i}: {exc}") from exc
    return out


@dataclass
class GlobalImportance:
    names: list[str]
    mean_abs_phi: list[float]

    def to_dict(self):
        return [{"feature": n, "mean_abs_phi": v}
                for n, v in zip(self.names, self.mean_abs_phi)]


def global_importance(explanations: list[ShapExplanation]) -> GlobalImportance:
    """Mean |phi| per feature, descending; ties broken by feature name."""
    if not explanations:
        raise ValueError("need at least one explanation")
    names = explanations[0].feature_names
    mat = np.abs(np.array([e.phi for e in explanations]))
    means = mat.mean(axis=0)
    order = sorted(range(len(names)), key=lambda j: (-means[j], names[j]))
    return GlobalImportance([names[j] for j in order], [float(means[j]) for j in order])


@dataclass
class SignThreshold:
    feature: str
    crossing: float
    direction: str  # "risk_increases_above" | "risk_increases_below"

    def to_dict(self):
        return {"feature": self.feature, "crossing": self.crossing,
                "direction": self.direction}


def sign_change_threshold(values, phi, feature_name="", bins: int = 20):
    """Zero crossing of bin-averaged phi over equal-frequency feature bins.

    Returns (SignThreshold | None, note). None with a note for all-one-
    sign or non-monotone (multiple-crossing) profiles.
    """
    values = np.asarray(values, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if values.size < 2 * bins:
        raise ValueError(f"need at least {2 * bins} points")
    edges = np.unique(np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1]))
    which = np.digitize(values, edges)
    centers, means = [], []
    for b in range(edges.size + 1):
        sel = which == b
        if np.any(sel):
            centers.append(float(values[sel].mean()))
            means.append(float(phi[sel].mean()))
    centers, means = np.array(centers), np.array(means)
    signs = np.sign(means)
    nz = signs[signs != 0]
    if nz.size == 0 or np.all(nz > 0) or np.all(nz < 0):
        return None, "no sign change"
    crossings = []
    for i in range(len(means) - 1):
        a, b = means[i], means[i + 1]
        if a == 0 or a * b < 0:
            t = centers[i] if a == 0 else centers[i] + (0 - a) / (b - a) * (
                centers[i + 1] - centers[i])
            direction = "risk_increases_above" if b > a else "risk_increases_below"
            crossings.append((float(t), direction))
    if not crossings:
        return None, "no sign change"
    if len(crossings) > 1:
        return None, "non-monotone, no single threshold"
    t, direction = crossings[0]
    return SignThreshold(feature_name, t, direction), ""


def waterfall_data(explanation: ShapExplanation) -> dict:
    """Contributions ordered by |phi| ascending with the cumulative path
    from the base value to the prediction."""
    order = np.argsort(np.abs(explanation.phi), kind="stable")
    cum = explanation.base_value
    steps = []
    for j in order:
        start = cum
        cum += float(explanation.phi[j])
        steps.append({
            "feature": explanation.feature_names[j],
            "value_original_scale": float(explanation.feature_values[j]),
            "phi": float(explanation.phi[j]),
            "from": start,
            "to": cum,
        })
    return {"base": explanation.base_value, "prediction": explanation.prediction,
            "steps": steps, "path_end": cum}


def risk_group_analysis(train_risks, eval_risks, eval_times, eval_events) -> dict:
    """Median split of eval rows at the training-risk median, with KM
    curves per group and a log-rank test."""
    train_risks = np.asarray(train_risks, dtype=float)
    if train_risks.size == 0:
        raise ValueError("train risks must be non-empty")
    eval_risks = np.asarray(eval_risks, dtype=float)
    cut = float(np.median(train_risks))
    high = eval_risks > cut
    eval_times = np.asarray(eval_times, dtype=float)
    eval_events = np.asarray(eval_events).astype(bool)
    out = {"median_cut": cut, "labels": np.where(high, "high", "low").tolist()}
    curves = {}
    for label, mask in (("low", ~high), ("high", high)):
        curves[label] = (kaplan_meier(eval_times[mask], eval_events[mask]).export()
                         if np.any(mask) else None)
    out["km_curves"] = curves
    if np.any(high) and np.any(~high) and np.any(eval_events):
        lr = log_rank_test(eval_times[~high], eval_events[~high],
                           eval_times[high], eval_events[high])
        out["log_rank"] = {"statistic": lr.statistic, "p_value": lr.p_value,
                           "degenerate": lr.degenerate}
    else:
        out["log_rank"] = {"statistic": None, "p_value": None, "degenerate": True,
                           "note": "a risk group is empty"}
    return out
