"""Random survival forest (RSF) and extra survival trees (EST).

Both grow binary trees that maximize the two-sample log-rank statistic at
each split and store Nelson-Aalen cumulative-hazard estimates in leaves.
They differ only in resampling and threshold generation:

* RSF: bootstrap sample per tree; every candidate feature contributes all
  midpoint thresholds between sorted distinct node values.
* EST: full training sample per tree; every candidate feature contributes
  exactly one uniform-random threshold between the node's min and max.

Fitting is sequential with per-tree seeds derived from the master seed by
tree index, so results are bit-identical regardless of worker counts.
The hot loops are numba-compiled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..survcore import SurvivalCurve

_UNBOUNDED_DEPTH = 10**9


@njit(cache=True)
def _logrank_score(t, e, g, m):
    """Squared log-rank statistic for the split mask g over m time-sorted
    node members; -1 when the variance is degenerate."""
    n_at = m
    n1_at = 0
    for i in range(m):
        if g[i]:
            n1_at += 1
    num = 0.0
    var = 0.0
    i = 0
    while i < m:
        j = i
        d = 0
        d1 = 0
        rem1 = 0
        tcur = t[i]
        while j < m and t[j] == tcur:
            if e[j]:
                d += 1
                if g[j]:
                    d1 += 1
            if g[j]:
                rem1 += 1
            j += 1
        if d > 0 and n_at > 1:
            frac = n1_at / n_at
            num += d1 - d * frac
            var += frac * (1.0 - frac) * d * (n_at - d) / (n_at - 1.0)
        n_at -= j - i
        n1_at -= rem1
        i = j
    if var <= 0.0:
        return -1.0
    return num * num / var


@njit(cache=True)
def _grow_tree(X, t, e, min_leaf, max_depth, mtry, est_mode, seed):
    """Grow one tree over rows of X (already time-sorted ascending).

    Returns (feature, threshold, left, right, start, end, n_nodes, samples)
    where samples is a permutation of row indices arranged so each node
    owns the contiguous, time-ordered range [start, end).
    """
    np.random.seed(seed)
    n, p = X.shape
    max_nodes = 4 * n + 8
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thresh = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    start = np.zeros(max_nodes, dtype=np.int64)
    end = np.zeros(max_nodes, dtype=np.int64)
    depth_arr = np.zeros(max_nodes, dtype=np.int64)

    samples = np.arange(n)
    n_nodes = 1
    start[0] = 0
    end[0] = n
    depth_arr[0] = 0

    stack = np.zeros(max_nodes, dtype=np.int64)
    stack[0] = 0
    top = 1

    g = np.empty(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)

    while top > 0:
        top -= 1
        node = stack[top]
        s, en = start[node], end[node]
        m = en - s
        if m < 2 * min_leaf or depth_arr[node] >= max_depth:
            continue
        members = samples[s:en]
        t_node = t[members]
        e_node = e[members]

        # draw mtry candidate features, evaluated in ascending index order
        perm = np.random.permutation(p)
        k = mtry if mtry < p else p
        cand = np.sort(perm[:k])

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        for ci in range(k):
            f = cand[ci]
            col = np.empty(m, dtype=np.float64)
            lo = X[members[0], f]
            hi = lo
            for i in range(m):
                v = X[members[i], f]
                col[i] = v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if hi <= lo:
                continue
            if est_mode:
                n_thr = 1
                thr_arr = np.empty(1, dtype=np.float64)
                thr_arr[0] = np.random.uniform(lo, hi)
            else:
                sv = np.unique(col)
                n_thr = sv.size - 1
                thr_arr = np.empty(n_thr, dtype=np.float64)
                for q in range(n_thr):
                    thr_arr[q] = 0.5 * (sv[q] + sv[q + 1])
            for q in range(n_thr):
                thr = thr_arr[q]
                n_left = 0
                for i in range(m):
                    gi = col[i] <= thr
                    g[i] = gi
                    if gi:
                        n_left += 1
                if n_left < min_leaf or m - n_left < min_leaf:
                    continue
                score = _logrank_score(t_node, e_node, g, m)
                if score > best_score or (
                    score == best_score and score >= 0.0 and (
                        f < best_f or (f == best_f and thr < best_thr))):
                    best_score = score
                    best_f = f
                    best_thr = thr

        if best_f < 0:
            continue  # no valid split: node stays a leaf

        # stable partition preserving time order
        n_left = 0
        n_right = 0
        for i in range(m):
            if X[members[i], best_f] <= best_thr:
                samples[s + n_left] = members[i]
                n_left += 1
            else:
                buf[n_right] = members[i]
                n_right += 1
        for i in range(n_right):
            samples[s + n_left + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thresh[node] = best_thr
        left[node] = lid
        right[node] = rid
        start[lid], end[lid] = s, s + n_left
        start[rid], end[rid] = s + n_left, en
        depth_arr[lid] = depth_arr[node] + 1
        depth_arr[rid] = depth_arr[node] + 1
        stack[top] = lid
        stack[top + 1] = rid
        top += 2

    return (feat[:n_nodes], thresh[:n_nodes], left[:n_nodes], right[:n_nodes],
            start[:n_nodes], end[:n_nodes], samples)


@njit(cache=True)
def _leaf_chf_matrix(feat, start, end, samples, t, e, grid):
    """Nelson-Aalen of each leaf's members evaluated on the time grid."""
    n_nodes = feat.size
    leaf_row = np.full(n_nodes, -1, dtype=np.int64)
    n_leaves = 0
    for node in range(n_nodes):
        if feat[node] < 0:
            leaf_row[node] = n_leaves
            n_leaves += 1
    chf = np.zeros((n_leaves, grid.size), dtype=np.float64)
    for node in range(n_nodes):
        row = leaf_row[node]
        if row < 0:
            continue
        s, en = start[node], end[node]
        m = en - s
        h = 0.0
        gi = 0
        i = 0
        while i < m:
            tcur = t[samples[s + i]]
            j = i
            d = 0
            while j < m and t[samples[s + j]] == tcur:
                if e[samples[s + j]]:
                    d += 1
                j += 1
            if d > 0:
                while gi < grid.size and grid[gi] < tcur:
                    chf[row, gi] = h
                    gi += 1
                h += d / (m - i)
            i = j
        while gi < grid.size:
            chf[row, gi] = h
            gi += 1
    return leaf_row, chf


@njit(cache=True)
def _route(X, feat, thresh, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thresh[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass
class SurvivalTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_row: np.ndarray    # node id -> row index into leaf_chf (-1 internal)
    leaf_chf: np.ndarray    # (n_leaves, len(grid))
    leaf_count: np.ndarray  # training samples per leaf row

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_row": self.leaf_row.tolist(),
            "leaf_chf": self.leaf_chf.tolist(),
            "leaf_count": self.leaf_count.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   np.array(d["leaf_row"], dtype=np.int64),
                   np.array(d["leaf_chf"], dtype=float).reshape(len(d["leaf_count"]), -1),
                   np.array(d["leaf_count"], dtype=np.int64))


@dataclass
class ForestHyperparams:
    n_trees: int = 100
    min_leaf_size: int = 10
    max_depth: int | None = None       # None = unbounded
    features_per_split: int | None = None  # None = ceil(sqrt(p))

    def to_dict(self):
        return {"n_trees": self.n_trees, "min_leaf_size": self.min_leaf_size,
                "max_depth": self.max_depth, "features_per_split": self.features_per_split}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d.get("n_trees", 100)), int(d.get("min_leaf_size", 10)),
                   d.get("max_depth"), d.get("features_per_split"))


@dataclass
class ForestModel:
    kind: str  # "RSF" | "EST"
    trees: list[SurvivalTree]
    hyperparams: ForestHyperparams
    grid: np.ndarray  # unique training event times
    seed: int
    feature_names: list[str] = field(default_factory=list)
    n_features: int = 0

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        if np.any(np.isnan(X)):
            raise ValueError("input contains missing values")
        return X

    def chf_matrix(self, X) -> np.ndarray:
        """Ensemble cumulative hazard on the event-time grid, row per input."""
        X = self._check(X)
        acc = np.zeros((X.shape[0], self.grid.size))
        for tree in self.trees:
            nodes = _route(X, tree.feature, tree.threshold, tree.left, tree.right)
            acc += tree.leaf_chf[tree.leaf_row[nodes]]
        return acc / len(self.trees)

    def chf_at(self, X, t: float) -> np.ndarray:
        """Ensemble cumulative hazard at a single time, row per input.

        Gathers one grid column per tree instead of materializing the
        full (n, grid) matrix, which matters for large SHAP batches.
        """
        X = self._check(X)
        idx = int(np.searchsorted(self.grid, float(t), side="right")) - 1
        acc = np.zeros(X.shape[0])
        if idx < 0:
            return acc
        for tree in self.trees:
            nodes = _route(X, tree.feature, tree.threshold, tree.left, tree.right)
            acc += tree.leaf_chf[tree.leaf_row[nodes], idx]
        return acc / len(self.trees)

    def risk_batch(self, X) -> np.ndarray:
        """Risk = sum of the ensemble cumulative hazard over the grid."""
        X = self._check(X)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            nodes = _route(X, tree.feature, tree.threshold, tree.left, tree.right)
            acc += tree.leaf_chf.sum(axis=1)[tree.leaf_row[nodes]]
        return acc / len(self.trees)

    def survival_matrix(self, X, grid=None) -> np.ndarray:
        chf = self.chf_matrix(X)
        if grid is not None:
            idx = np.searchsorted(self.grid, np.asarray(grid, dtype=float), side="right") - 1
            chf = np.where(idx[None, :] >= 0, chf[:, np.clip(idx, 0, None)], 0.0)
        return np.exp(-chf)

    def predict(self, x):
        X = self._check(np.atleast_2d(x))
        chf = self.chf_matrix(X)[0]
        return float(chf.sum()), SurvivalCurve(self.grid, np.exp(-np.maximum.accumulate(chf)))

    def predict_batch(self, X):
        X = self._check(X)
        chf = self.chf_matrix(X)
        return [(float(row.sum()),
                 SurvivalCurve(self.grid, np.exp(-np.maximum.accumulate(row))))
                for row in chf]

    def to_dict(self):
        return {
            "kind": self.kind,
            "hyperparams": self.hyperparams.to_dict(),
            "grid": self.grid.tolist(),
            "seed": self.seed,
            "feature_names": self.feature_names,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], [SurvivalTree.from_dict(t) for t in d["trees"]],
                   ForestHyperparams.from_dict(d["hyperparams"]),
                   np.array(d["grid"], dtype=float), int(d["seed"]),
                   list(d["feature_names"]), int(d["n_features"]))


def fit_forest(X, times, events, hp: ForestHyperparams | None = None, kind: str = "EST",
               seed: int = 0, feature_names=None) -> ForestModel:
    """Fit an RSF or EST ensemble; deterministic for a fixed seed."""
    if kind not in ("RSF", "EST"):
        raise ValueError(f"kind must be RSF or EST, got {kind!r}")
    hp = hp or ForestHyperparams()
    if hp.n_trees < 1 or hp.min_leaf_size < 1:
        raise ValueError("n_trees and min_leaf_size must be >= 1")
    X = np.asarray(X, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if np.any(np.isnan(X)):
        raise ValueError("design matrix contains missing values")
    n, p = X.shape
    mtry = hp.features_per_split or int(np.ceil(np.sqrt(p)))
    mtry = min(max(mtry, 1), p)
    depth = hp.max_depth if hp.max_depth is not None else _UNBOUNDED_DEPTH

    grid = np.unique(times[events])
    if grid.size == 0:
        grid = np.array([float(np.max(times))])

    master = np.random.SeedSequence(seed)
    tree_seeds = master.generate_state(hp.n_trees * 2, dtype=np.uint32)
    order = np.argsort(times, kind="stable")

    trees = []
    for ti in range(hp.n_trees):
        grow_seed = int(tree_seeds[2 * ti] % np.iinfo(np.int32).max)
        if kind == "RSF":
            boot_rng = np.random.default_rng(int(tree_seeds[2 * ti + 1]))
            rows = np.sort(boot_rng.integers(0, n, size=n))
            rows = rows[np.argsort(times[rows], kind="stable")]
        else:
            rows = order
        Xt, tt, et = X[rows], times[rows], events[rows]
        feat, thr, left, right, start, end, samples = _grow_tree(
            Xt, tt, et, hp.min_leaf_size, depth, mtry, kind == "EST", grow_seed)
        leaf_row, chf = _leaf_chf_matrix(feat, start, end, samples, tt, et, grid)
        counts = np.array([end[i] - start[i] for i in range(feat.size) if feat[i] < 0],
                          dtype=np.int64)
        trees.append(SurvivalTree(feat, thr, left, right, leaf_row, chf, counts))

    names = list(feature_names) if feature_names else [f"x{j}" for j in range(p)]
    return ForestModel(kind, trees, hp, grid, seed, names, p)
