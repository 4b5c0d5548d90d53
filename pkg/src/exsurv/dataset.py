"""Cohort ingestion and preprocessing.

Pipeline order is fixed: sparse-feature drop -> incomplete-sample drop ->
stratified split -> z-normalization (training stats only) -> kNN
imputation (training donors only). Re-running any step on its own output
is a no-op.

Cohort files are UTF-8 CSV with a header row; an empty cell is a missing
value; the survival columns are named ``time_days`` and ``event`` (0/1).
Feature metadata travels in a JSON schema sidecar.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

TIME_COL = "time_days"
EVENT_COL = "event"


class CohortError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = "continuous"  # "continuous" | "categorical"
    unit: str | None = None
    required: bool = False
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise CohortError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and not self.levels:
            raise CohortError(f"categorical feature {self.name!r} needs a level set")

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind, "required": self.required}
        if self.unit:
            d["unit"] = self.unit
        if self.levels:
            d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            name=d["name"],
            kind=d.get("kind", "continuous"),
            unit=d.get("unit"),
            required=bool(d.get("required", False)),
            levels=tuple(d.get("levels", ())),
        )


@dataclass
class Cohort:
    """Feature matrix plus censored outcomes and a per-cell missing mask.

    Categorical cells are stored as integer level indices in ``X``;
    continuous cells as floats. Missing cells hold NaN and are flagged in
    ``missing``.
    """

    features: list[FeatureSpec]
    X: np.ndarray          # (n, p) float
    missing: np.ndarray    # (n, p) bool
    times: np.ndarray      # (n,) float, > 0
    events: np.ndarray     # (n,) bool

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise CohortError("feature names must be unique")
        if self.X.shape != self.missing.shape or self.X.shape[1] != len(self.features):
            raise CohortError("inconsistent cohort dimensions")
        if np.any(self.times <= 0):
            raise CohortError("survival times must be positive")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return len(self.features)

    def feature_index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise CohortError(f"unknown feature {name!r}")

    def subset_rows(self, idx) -> "Cohort":
        idx = np.asarray(idx)
        return Cohort(self.features, self.X[idx].copy(), self.missing[idx].copy(),
                      self.times[idx].copy(), self.events[idx].copy())

    def to_model_matrix(self) -> tuple[np.ndarray, list[str]]:
        """Dense design matrix with categorical features one-hot encoded.

        Binary categoricals become a single indicator for the second
        level; k-level categoricals expand to k indicators.
        """
        cols, names = [], []
        for j, f in enumerate(self.features):
            if f.kind == "continuous":
                cols.append(self.X[:, j])
                names.append(f.name)
            elif len(f.levels) == 2:
                cols.append((self.X[:, j] == 1).astype(float))
                names.append(f"{f.name}={f.levels[1]}")
            else:
                for lv_idx, lv in enumerate(f.levels):
                    cols.append((self.X[:, j] == lv_idx).astype(float))
                    names.append(f"{f.name}={lv}")
        return np.column_stack(cols) if cols else np.empty((self.n, 0)), names


def write_schema(path, features: list[FeatureSpec]):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([f.to_dict() for f in features], fh, indent=2)


def read_schema(path) -> list[FeatureSpec]:
    with open(path, encoding="utf-8") as fh:
        return [FeatureSpec.from_dict(d) for d in json.load(fh)]


def load_cohort(path, schema: list[FeatureSpec]) -> Cohort:
    """Parse a cohort CSV against a schema.

    Raises CohortError naming the offending row for malformed rows,
    unknown categorical levels, and non-positive or missing survival
    times.
    """
    by_name = {f.name: f for f in schema}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: empty file") from None
        if TIME_COL not in header or EVENT_COL not in header:
            raise CohortError(f"{path}: missing {TIME_COL!r}/{EVENT_COL!r} columns")
        feat_cols = [c for c in header if c not in (TIME_COL, EVENT_COL)]
        if set(feat_cols) != set(by_name):
            extra = set(feat_cols) - set(by_name)
            missing = set(by_name) - set(feat_cols)
            raise CohortError(f"{path}: header/schema mismatch (extra={sorted(extra)}, "
                              f"missing={sorted(missing)})")
        features = [by_name[c] for c in feat_cols]
        t_idx, e_idx = header.index(TIME_COL), header.index(EVENT_COL)
        f_idx = [header.index(c) for c in feat_cols]

        rows, mask, times, events = [], [], [], []
        for rownum, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise CohortError(f"{path}: malformed row {rownum} "
                                  f"({len(raw)} cells, expected {len(header)})")
            t_raw, e_raw = raw[t_idx].strip(), raw[e_idx].strip()
            if not t_raw or not e_raw:
                raise CohortError(f"{path}: row {rownum}: missing survival information")
            t = float(t_raw)
            if t <= 0:
                raise CohortError(f"{path}: row {rownum}: non-positive time_days {t}")
            if e_raw not in ("0", "1"):
                raise CohortError(f"{path}: row {rownum}: event must be 0/1, got {e_raw!r}")
            vals, miss = [], []
            for spec, col in zip(features, f_idx):
                cell = raw[col].strip()
                if cell == "":
                    vals.append(np.nan)
                    miss.append(True)
                elif spec.kind == "categorical":
                    if cell not in spec.levels:
                        raise CohortError(f"{path}: row {rownum}: unknown level {cell!r} "
                                          f"for {spec.name!r}")
                    vals.append(float(spec.levels.index(cell)))
                    miss.append(False)
                else:
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise CohortError(f"{path}: row {rownum}: non-numeric value "
                                          f"{cell!r} for {spec.name!r}") from None
                    miss.append(False)
            rows.append(vals)
            mask.append(miss)
            times.append(t)
            events.append(e_raw == "1")

    if not rows:
        raise CohortError(f"{path}: no data rows")
    return Cohort(features, np.array(rows, dtype=float), np.array(mask, dtype=bool),
                  np.array(times, dtype=float), np.array(events, dtype=bool))


def write_cohort(path, cohort: Cohort):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        names = [f.name for f in cohort.features]
        writer.writerow(names + [TIME_COL, EVENT_COL])
        for i in range(cohort.n):
            row = []
            for j, spec in enumerate(cohort.features):
                if cohort.missing[i, j]:
                    row.append("")
                elif spec.kind == "categorical":
                    row.append(spec.levels[int(cohort.X[i, j])])
                else:
                    row.append(repr(float(cohort.X[i, j])))
            row += [repr(float(cohort.times[i])), str(int(cohort.events[i]))]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# preprocessing steps


def drop_sparse_features(cohort: Cohort, max_missing_frac: float = 0.20):
    """Drop features whose missing fraction strictly exceeds the threshold.

    Exactly-at-threshold features are retained.
    """
    if not 0 < max_missing_frac < 1:
        raise CohortError("max_missing_frac must lie in (0, 1)")
    frac = cohort.missing.mean(axis=0)
    keep = frac <= max_missing_frac
    if not np.any(keep):
        raise CohortError("all features exceed the missingness threshold")
    report = {
        "dropped": [
            {"name": f.name, "missing_frac": float(fr)}
            for f, fr, k in zip(cohort.features, frac, keep) if not k
        ],
        "threshold": max_missing_frac,
    }
    kept = np.flatnonzero(keep)
    out = Cohort([cohort.features[j] for j in kept], cohort.X[:, kept].copy(),
                 cohort.missing[:, kept].copy(), cohort.times.copy(), cohort.events.copy())
    return out, report


def drop_incomplete_samples(cohort: Cohort, required: list[str] | None = None):
    """Remove rows missing any required feature or any categorical feature."""
    required = list(required or [])
    req_idx = [cohort.feature_index(name) for name in required]
    cat_idx = [j for j, f in enumerate(cohort.features) if f.kind == "categorical"]
    check = sorted(set(req_idx) | set(cat_idx))
    bad = cohort.missing[:, check].any(axis=1) if check else np.zeros(cohort.n, dtype=bool)
    report = {
        "removed_rows": [int(i) for i in np.flatnonzero(bad)],
        "n_removed": int(bad.sum()),
        "checked_features": [cohort.features[j].name for j in check],
    }
    return cohort.subset_rows(~bad), report


@dataclass
class SplitIndices:
    train: np.ndarray
    test: np.ndarray

    def to_dict(self):
        return {"train": self.train.tolist(), "test": self.test.tolist()}


def stratified_split(cohort: Cohort, train_frac: float = 0.8, seed: int = 0) -> SplitIndices:
    """Event-stratified train/test split, deterministic for a fixed seed."""
    if not 0 < train_frac < 1:
        raise CohortError("train_frac must lie in (0, 1)")
    if not (np.any(cohort.events) and np.any(~cohort.events)):
        raise CohortError("stratified split needs at least one event and one censored row")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for flag in (True, False):
        idx = np.flatnonzero(cohort.events == flag)
        idx = rng.permutation(idx)
        n_train = int(round(train_frac * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1) if idx.size > 1 else n_train
        train_parts.append(idx[:n_train])
        test_parts.append(idx[n_train:])
    return SplitIndices(np.sort(np.concatenate(train_parts)),
                        np.sort(np.concatenate(test_parts)))


@dataclass
class NormalizationStats:
    """Training means and population (n-denominator) standard deviations.

    Zero-variance training features are flagged and passed through
    unscaled.
    """

    feature_names: list[str]
    mean: np.ndarray
    std: np.ndarray
    normalized: np.ndarray  # bool per feature; False = flagged constant or categorical

    def to_dict(self):
        return {
            "features": self.feature_names,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "normalized": self.normalized.tolist(),
            "std_kind": "population",
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["features"], np.array(d["mean"]), np.array(d["std"]),
                   np.array(d["normalized"], dtype=bool))


def fit_normalizer(cohort: Cohort, train_idx) -> NormalizationStats:
    train_idx = np.asarray(train_idx)
    mean = np.zeros(cohort.p)
    std = np.ones(cohort.p)
    normalized = np.zeros(cohort.p, dtype=bool)
    for j, f in enumerate(cohort.features):
        if f.kind != "continuous":
            continue
        obs = cohort.X[train_idx, j][~cohort.missing[train_idx, j]]
        if obs.size == 0:
            continue
        m, s = float(np.mean(obs)), float(np.std(obs))
        if s > 0:
            mean[j], std[j], normalized[j] = m, s, True
    return NormalizationStats([f.name for f in cohort.features], mean, std, normalized)


def apply_normalizer(cohort: Cohort, norm: NormalizationStats) -> Cohort:
    if norm.feature_names != [f.name for f in cohort.features]:
        raise CohortError("normalizer feature list does not match cohort")
    X = cohort.X.copy()
    for j in np.flatnonzero(norm.normalized):
        X[:, j] = (X[:, j] - norm.mean[j]) / norm.std[j]
    return Cohort(cohort.features, X, cohort.missing.copy(),
                  cohort.times.copy(), cohort.events.copy())


def knn_impute(cohort: Cohort, k: int = 5, donors: Cohort | None = None) -> Cohort:
    """Fill missing continuous cells with the mean of the k nearest donors.

    Distance is Euclidean over mutually observed features, rescaled by the
    number of observed coordinates; a donor must have the target cell
    observed. Donor pool defaults to the cohort itself (self excluded per
    row); pass the training cohort when imputing test rows.

    Categorical cells are never imputed here: rows missing them are
    dropped earlier in the pipeline.
    """
    if not np.any(cohort.missing):
        return cohort
    pool = donors if donors is not None else cohort
    self_pool = donors is None
    X = cohort.X.copy()
    miss = cohort.missing
    pX, pmiss = pool.X, pool.missing
    p = cohort.p
    cont = np.array([f.kind == "continuous" for f in cohort.features])

    for i in np.flatnonzero(miss.any(axis=1)):
        obs_i = ~miss[i]
        # squared distance over mutually observed coords, rescaled to p coords
        both = obs_i[None, :] & ~pmiss
        diff = np.where(both, pX - X[i], 0.0)
        counts = both.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(counts > 0, np.sqrt((diff**2).sum(axis=1) * p / counts), np.inf)
        if self_pool:
            dist[i] = np.inf
        for j in np.flatnonzero(miss[i]):
            if not cont[j]:
                raise CohortError(
                    f"missing categorical cell (row {i}, {cohort.features[j].name!r}); "
                    "drop incomplete samples before imputing")
            cand = np.flatnonzero(~pmiss[:, j] & np.isfinite(dist))
            if cand.size == 0:
                raise CohortError(f"no donor for cell (row {i}, {cohort.features[j].name!r})")
            order = cand[np.argsort(dist[cand], kind="stable")]
            X[i, j] = float(np.mean(pX[order[:k], j]))

    return Cohort(cohort.features, X, np.zeros_like(miss), cohort.times.copy(),
                  cohort.events.copy())


# ---------------------------------------------------------------------------
# baseline comparison


def benjamini_hochberg(pvals) -> np.ndarray:
    """BH step-up adjusted p-values (monotone in raw-p rank order)."""
    p = np.asarray(pvals, dtype=float)
    n = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * n / np.arange(1, n + 1)
    adj = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(n)
    out[order] = np.clip(adj, 0, 1)
    return out


def baseline_group_comparison(cohort: Cohort, alpha: float = 0.05):
    """Alive-vs-deceased comparison table per feature.

    Mann-Whitney U (normal approximation, tie-corrected) for continuous
    features, chi-square without Yates correction for categoricals, then
    Benjamini-Hochberg adjustment across all testable features.
    """
    dead = cohort.events
    if not (np.any(dead) and np.any(~dead)):
        raise CohortError("both outcome groups must be non-empty")
    entries = []
    for j, f in enumerate(cohort.features):
        obs = ~cohort.missing[:, j]
        a = cohort.X[obs & dead, j]
        b = cohort.X[obs & ~dead, j]
        entry = {"feature": f.name, "kind": f.kind, "test": None, "p": None,
                 "skipped": False, "note": ""}
        if a.size == 0 or b.size == 0:
            entry.update(skipped=True, note="a group has no observed values")
        elif f.kind == "continuous":
            entry["test"] = "mann-whitney-u"
            if np.ptp(np.concatenate([a, b])) == 0:
                entry["p"] = 1.0  # identical constant in both groups
            else:
                res = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
                entry["p"] = float(res.pvalue)
        else:
            entry["test"] = "chi-square"
            levels = np.arange(len(f.levels))
            table = np.array([[np.sum(a == lv) for lv in levels],
                              [np.sum(b == lv) for lv in levels]], dtype=float)
            table = table[:, table.sum(axis=0) > 0]
            if table.shape[1] < 2 or np.any(table.sum(axis=1) == 0):
                entry.update(skipped=True, note="degenerate contingency table")
            else:
                chi2, p, _, _ = stats.chi2_contingency(table, correction=False)
                entry["p"] = float(p)
                entry["statistic"] = float(chi2)
        entries.append(entry)

    testable = [e for e in entries if e["p"] is not None]
    if testable:
        adj = benjamini_hochberg([e["p"] for e in testable])
        for e, a_p in zip(testable, adj):
            e["p_adjusted"] = float(a_p)
            e["significant"] = bool(a_p < alpha)
    for e in entries:
        e.setdefault("p_adjusted", None)
        e.setdefault("significant", False)
    return entries


def chi_square_statistic(table) -> float:
    """Pearson chi-square of a contingency table, no continuity correction."""
    chi2, _, _, _ = stats.chi2_contingency(np.asarray(table, dtype=float), correction=False)
    return float(chi2)
