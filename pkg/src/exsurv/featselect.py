"""Filter-ensemble feature selection and model-specific forward selection.

Three classification-style filters score features against the binary
event flag (mutual information, SURF relief, greedy mRMR); a univariate
Cox screen alone consumes the full censored outcome. The top half of each
ranking is intersected with the screen's significant set, prior features
are injected, and a greedy forward pass over CV C-index picks the final
subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import benjamini_hochberg
from .models.cox import CoxConvergenceError, cox_wald_pvalue
from .tune import FoldAssignment, cv_score

N_MI_BINS = 10


@dataclass
class FeatureRanking:
    method: str
    names: list[str]
    scores: list[float]
    extra: dict = field(default_factory=dict)

    def top_fraction(self, keep_frac: float) -> set[str]:
        k = math.ceil(keep_frac * len(self.names))
        return set(self.names[:k])

    def to_dict(self):
        d = {"method": self.method,
             "ranking": [{"name": n, "score": s} for n, s in zip(self.names, self.scores)]}
        d.update(self.extra)
        return d


@dataclass
class SelectionResult:
    retained: dict[str, set]
    intersection: list[str]
    priors: list[str] = field(default_factory=list)
    warning: str | None = None

    @property
    def candidates(self) -> list[str]:
        seen, out = set(), []
        for name in list(self.intersection) + list(self.priors):
            if name not in seen:
                seen.add(name)
                out.append(name)
        return out

    def to_dict(self):
        return {
            "retained": {m: sorted(s) for m, s in self.retained.items()},
            "intersection": list(self.intersection),
            "priors": list(self.priors),
            "candidates": self.candidates,
            "warning": self.warning,
        }


def _equal_frequency_bins(x, n_bins=N_MI_BINS):
    """Discretize into at most n_bins equal-frequency bins."""
    qs = np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1])
    return np.digitize(x, np.unique(qs))


def _mi_discrete(a, b) -> float:
    """Plug-in mutual information (natural log) of two discrete arrays."""
    a_vals, a_inv = np.unique(a, return_inverse=True)
    b_vals, b_inv = np.unique(b, return_inverse=True)
    joint = np.zeros((a_vals.size, b_vals.size))
    np.add.at(joint, (a_inv, b_inv), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(joint / (pa * pb))
    return float(np.nansum(terms))


def _discretize_matrix(X, continuous_mask):
    cols = []
    for j in range(X.shape[1]):
        col = X[:, j]
        cols.append(_equal_frequency_bins(col) if continuous_mask[j] else col.astype(int))
    return cols


def mutual_information_rank(X, event_flags, feature_names,
                            continuous_mask=None) -> FeatureRanking:
    """MI(feature; event) with 10 equal-frequency bins for continuous
    features; constant features score 0."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 10:
        raise ValueError("mutual information ranking needs at least 10 rows")
    y = np.asarray(event_flags).astype(int)
    cont = np.ones(X.shape[1], bool) if continuous_mask is None else continuous_mask
    scores = []
    for j, col in enumerate(_discretize_matrix(X, cont)):
        scores.append(0.0 if np.unique(col).size < 2 else _mi_discrete(col, y))
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], feature_names[j]))
    return FeatureRanking("MutualInformation", [feature_names[j] for j in order],
                          [scores[j] for j in order])


def surf_relieff_rank(X, event_flags, feature_names) -> FeatureRanking:
    """SURF scoring: every neighbor within the global mean pairwise
    distance contributes; misses add and hits subtract the normalized
    feature difference."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(event_flags).astype(bool)
    n, p = X.shape
    if min(int(y.sum()), int((~y).sum())) < 2:
        raise ValueError("SURF needs at least 2 rows per class")
    rng_span = np.ptp(X, axis=0)
    span = np.where(rng_span > 0, rng_span, 1.0)
    Xn = X / span
    d2 = ((Xn[:, None, :] - Xn[None, :, :]) ** 2).sum(axis=2)
    dist = np.sqrt(d2)
    iu = np.triu_indices(n, k=1)
    mean_dist = float(dist[iu].mean())
    if mean_dist == 0:
        return FeatureRanking("SURFRelief", list(feature_names), [0.0] * p)

    w = np.zeros(p)
    for i in range(n):
        near = (dist[i] < mean_dist)
        near[i] = False
        hits = near & (y == y[i])
        misses = near & (y != y[i])
        diff = np.abs(Xn - Xn[i])
        if hits.any():
            w -= diff[hits].mean(axis=0)
        if misses.any():
            w += diff[misses].mean(axis=0)
    w /= n
    order = sorted(range(p), key=lambda j: (-w[j], feature_names[j]))
    return FeatureRanking("SURFRelief", [feature_names[j] for j in order],
                          [float(w[j]) for j in order])


def mrmr_rank(X, event_flags, feature_names, m=None,
              continuous_mask=None) -> FeatureRanking:
    """Greedy MID mRMR: relevance MI(f; event) minus mean MI with the
    already-selected set. Ties break by feature index."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(event_flags).astype(int)
    p = X.shape[1]
    m = p if m is None else min(m, p)
    cont = np.ones(p, bool) if continuous_mask is None else continuous_mask
    disc = _discretize_matrix(X, cont)
    relevance = np.array([0.0 if np.unique(c).size < 2 else _mi_discrete(c, y)
                          for c in disc])
    redundancy_cache = {}

    def red(a, b):
        key = (min(a, b), max(a, b))
        if key not in redundancy_cache:
            redundancy_cache[key] = _mi_discrete(disc[key[0]], disc[key[1]])
        return redundancy_cache[key]

    selected, scores = [], []
    remaining = list(range(p))
    for _ in range(m):
        best_j, best_s = None, -np.inf
        for j in remaining:
            s = relevance[j]
            if selected:
                s -= np.mean([red(j, k) for k in selected])
            # tie-break by feature name, matching mutual_information_rank
            if s > best_s + 1e-15 or (abs(s - best_s) <= 1e-15
                                      and feature_names[j] < feature_names[best_j]):
                best_j, best_s = j, s
        selected.append(best_j)
        scores.append(float(best_s))
        remaining.remove(best_j)
    return FeatureRanking("MRMR", [feature_names[j] for j in selected], scores)


def univariate_cox_screen(X, times, events, feature_names, alpha: float = 0.05):
    """Per-feature Cox Wald test, BH adjustment, keep adjusted p < alpha.

    Returns (kept set, detail table). Non-convergent fits are excluded
    and flagged.
    """
    X = np.asarray(X, dtype=float)
    pvals, tested, flagged = [], [], []
    for j, name in enumerate(feature_names):
        try:
            pvals.append(cox_wald_pvalue(X[:, j], times, events))
            tested.append(name)
        except (CoxConvergenceError, ValueError, np.linalg.LinAlgError):
            flagged.append(name)
    table = []
    kept = set()
    if tested:
        adj = benjamini_hochberg(pvals)
        for name, raw, a in zip(tested, pvals, adj):
            sig = bool(a < alpha)
            table.append({"name": name, "p": float(raw), "p_adjusted": float(a),
                          "significant": sig})
            if sig:
                kept.add(name)
    for name in flagged:
        table.append({"name": name, "p": None, "p_adjusted": None,
                      "significant": False, "note": "fit did not converge"})
    return kept, table


def combine_filters(rankings: list[FeatureRanking], cox_set: set,
                    keep_frac: float = 0.5) -> SelectionResult:
    """Top keep_frac of each ranking, intersected together and with the
    Cox screen. Intersection order follows the first ranking."""
    universes = [set(r.names) for r in rankings]
    if any(u != universes[0] for u in universes):
        raise ValueError("rankings must cover the same feature universe")
    retained = {r.method: r.top_fraction(keep_frac) for r in rankings}
    retained["UnivariateCox"] = set(cox_set)
    inter = set.intersection(*retained.values()) if retained else set()
    ordered = [n for n in rankings[0].names if n in inter]
    warning = "empty intersection: forward selection will run on priors only" \
        if not ordered else None
    return SelectionResult(retained, ordered, warning=warning)


def inject_priors(selection: SelectionResult, prior_names: list[str],
                  universe: list[str]) -> SelectionResult:
    for name in prior_names:
        if name not in universe:
            raise ValueError(f"unknown prior feature {name!r}")
    return SelectionResult(selection.retained, selection.intersection,
                           priors=list(dict.fromkeys(prior_names)),
                           warning=selection.warning)


def forward_select(candidates: list[str], model_factory, X, times, events,
                   folds: FoldAssignment, feature_names: list[str],
                   min_improvement: float = 1e-4):
    """Greedy forward selection on mean CV C-index.

    Starts from the empty set (baseline score 0.5); at each step adds the
    candidate with the best mean CV C-index, stopping when the best
    addition improves by less than ``min_improvement``. Returns the
    selected name list and the per-step trace.
    """
    if not candidates:
        raise ValueError("forward selection needs at least one candidate")
    name_to_col = {n: j for j, n in enumerate(feature_names)}
    X = np.asarray(X, dtype=float)
    selected: list[str] = []
    best_score = 0.5
    trace = []
    remaining = list(candidates)
    while remaining:
        step_best, step_score, step_folds = None, -np.inf, None
        skipped = []
        for name in remaining:
            cols = [name_to_col[n] for n in selected + [name]]
            try:
                score, fold_scores = cv_score(model_factory, {"features": cols},
                                              X[:, cols], times, events, folds)
            except Exception as exc:  # factory failure: skip this candidate
                skipped.append({"name": name, "error": str(exc)})
                continue
            if score > step_score:
                step_best, step_score, step_folds = name, score, fold_scores
        if step_best is None or step_score < best_score + min_improvement:
            trace.append({"stopped": True, "best_candidate": step_best,
                          "score": None if step_best is None else float(step_score),
                          "skipped": skipped})
            break
        selected.append(step_best)
        best_score = step_score
        trace.append({"added": step_best, "score": float(step_score),
                      "fold_scores": step_folds, "skipped": skipped})
        remaining.remove(step_best)
    return selected, trace
