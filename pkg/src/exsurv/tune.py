"""Hyperparameter search: stratified k-fold CV scoring and a
tree-structured Parzen estimator.

The TPE here keeps an independent Parzen density per dimension: after
``n_startup`` uniform trials, finished trials are split at the gamma
quantile of the objective into good/bad sets, one-dimensional kernel
densities l and g are built over each, ``n_candidates`` draws are taken
from l, and the draw maximizing l/g is evaluated next. Trials run
sequentially; everything is deterministic per seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import MetricError, harrell_cindex


class TuneError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# search-space dimensions


@dataclass(frozen=True)
class IntDim:
    name: str
    low: int
    high: int

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError(f"{self.name}: empty integer range")


@dataclass(frozen=True)
class FloatDim:
    name: str
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if self.high <= self.low:
            raise ValueError(f"{self.name}: empty range")
        if self.log and self.low <= 0:
            raise ValueError(f"{self.name}: log range must be strictly positive")


@dataclass(frozen=True)
class CatDim:
    name: str
    choices: tuple

    def __post_init__(self):
        if not self.choices:
            raise ValueError(f"{self.name}: empty categorical set")


Dim = IntDim | FloatDim | CatDim


@dataclass
class SearchSpace:
    dims: list[Dim]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    def contains(self, config: dict) -> bool:
        for d in self.dims:
            v = config[d.name]
            if isinstance(d, CatDim):
                if v not in d.choices:
                    return False
            elif not (d.low <= v <= d.high):
                return False
        return True


def forest_space(n_features: int) -> SearchSpace:
    """Conventional EST/RSF hyperparameter ranges."""
    return SearchSpace([
        IntDim("n_trees", 50, 500),
        IntDim("min_leaf_size", 5, 50),
        CatDim("max_depth", (None, *range(5, 31))),
        IntDim("features_per_split", 2 if n_features >= 2 else 1, max(n_features, 2)),
    ])


def cox_space() -> SearchSpace:
    return SearchSpace([FloatDim("lam", 1e-4, 1e2, log=True)])


# ---------------------------------------------------------------------------
# stratified cross-validation


@dataclass
class FoldAssignment:
    folds: list[np.ndarray]

    def __iter__(self):
        return iter(self.folds)


def stratified_kfold(events, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Partition rows into k folds stratified on the event flag."""
    events = np.asarray(events).astype(bool)
    n_ev, n_cens = int(events.sum()), int((~events).sum())
    if k > min(n_ev, n_cens):
        raise TuneError(f"k={k} exceeds the smaller stratum size "
                        f"(events={n_ev}, censored={n_cens})")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for flag in (True, False):
        idx = rng.permutation(np.flatnonzero(events == flag))
        for f in range(k):
            folds[f].extend(idx[f::k])
    return FoldAssignment([np.sort(np.array(f, dtype=int)) for f in folds])


def cv_score(model_factory, config: dict, X, times, events,
             folds: FoldAssignment) -> tuple[float, list[float]]:
    """Mean held-out Harrell C-index over the folds.

    ``model_factory(config, X_train, times, events)`` must return an
    object with ``risk_batch``.
    """
    X = np.asarray(X, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    all_idx = np.arange(times.size)
    scores = []
    for held_out in folds:
        train = np.setdiff1d(all_idx, held_out)
        model = model_factory(config, X[train], times[train], events[train])
        risks = np.asarray(model.risk_batch(X[held_out]), dtype=float)
        try:
            scores.append(harrell_cindex(risks, times[held_out], events[held_out]).c_index)
        except MetricError:
            scores.append(0.5)  # held-out fold with no comparable pairs
    return float(np.mean(scores)), scores


# ---------------------------------------------------------------------------
# TPE


@dataclass
class Trial:
    index: int
    config: dict
    score: float | None      # None = failed
    fold_scores: list[float] = field(default_factory=list)

    def to_dict(self):
        return {"index": self.index, "config": _jsonable(self.config),
                "score": self.score, "fold_scores": self.fold_scores}


def _jsonable(config):
    out = {}
    for k, v in config.items():
        if isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        out[k] = v
    return out


@dataclass
class TrialLog:
    trials: list[Trial]
    best_index: int

    @property
    def best(self) -> Trial:
        return self.trials[self.best_index]

    def best_so_far(self) -> list[float]:
        trace, cur = [], -np.inf
        for t in self.trials:
            if t.score is not None and t.score > cur:
                cur = t.score
            trace.append(cur)
        return trace

    def save_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.trials:
                fh.write(json.dumps(t.to_dict()) + "\n")


def _scott_bandwidth(vals, span):
    std = float(np.std(vals))
    bw = std * vals.size ** (-0.2) if std > 0 else 0.0
    # the floors keep degenerate (single-point or zero-span) densities
    # explorable and finite
    return max(bw, span * 0.02, 1e-12)


def _parzen_logpdf(x, centers, bw, low, high):
    """Log density of a Gaussian mixture over the observations plus one
    wide prior component spanning [low, high]."""
    centers = np.append(centers, 0.5 * (low + high))
    bws = np.full(centers.size, bw)
    bws[-1] = max(high - low, bw)
    z = (x - centers) / bws
    log_comps = -0.5 * z**2 - np.log(bws * math.sqrt(2 * math.pi))
    m = np.max(log_comps)
    return m + math.log(np.mean(np.exp(log_comps - m)))


class _NumericSampler:
    def __init__(self, dim):
        self.dim = dim
        if isinstance(dim, IntDim):
            self.low, self.high, self.log = float(dim.low), float(dim.high), False
        else:
            self.low, self.high, self.log = dim.low, dim.high, dim.log
        if self.log:
            self.lo_t, self.hi_t = math.log(self.low), math.log(self.high)
        else:
            self.lo_t, self.hi_t = self.low, self.high

    def _transform(self, v):
        return math.log(v) if self.log else float(v)

    def _inverse(self, t):
        v = math.exp(t) if self.log else t
        v = min(max(v, self.low), self.high)
        if isinstance(self.dim, IntDim):
            v = int(round(v))
            v = min(max(v, self.dim.low), self.dim.high)
        return v

    def sample_uniform(self, rng):
        return self._inverse(rng.uniform(self.lo_t, self.hi_t))

    def sample_from(self, rng, observed):
        ts = np.array([self._transform(v) for v in observed])
        bw = _scott_bandwidth(ts, self.hi_t - self.lo_t)
        # one extra slot draws from the wide prior component
        k = rng.integers(ts.size + 1)
        if k == ts.size:
            return self._inverse(rng.uniform(self.lo_t, self.hi_t))
        return self._inverse(rng.normal(ts[k], bw))

    def log_ratio(self, value, good, bad):
        t = self._transform(value)
        tg = np.array([self._transform(v) for v in good])
        tb = np.array([self._transform(v) for v in bad])
        span = self.hi_t - self.lo_t
        lg = _parzen_logpdf(t, tg, _scott_bandwidth(tg, span), self.lo_t, self.hi_t)
        lb = _parzen_logpdf(t, tb, _scott_bandwidth(tb, span), self.lo_t, self.hi_t)
        return lg - lb


class _CatSampler:
    def __init__(self, dim: CatDim):
        self.dim = dim

    def sample_uniform(self, rng):
        return self.dim.choices[rng.integers(len(self.dim.choices))]

    def _weights(self, observed):
        # add-one smoothed empirical mass
        counts = np.array([1.0 + sum(1 for v in observed if v == c)
                           for c in self.dim.choices])
        return counts / counts.sum()

    def sample_from(self, rng, observed):
        w = self._weights(observed)
        return self.dim.choices[rng.choice(len(self.dim.choices), p=w)]

    def log_ratio(self, value, good, bad):
        i = self.dim.choices.index(value)
        return math.log(self._weights(good)[i]) - math.log(self._weights(bad)[i])


def _sampler(dim):
    return _CatSampler(dim) if isinstance(dim, CatDim) else _NumericSampler(dim)


def tpe_optimize(space: SearchSpace, objective, n_trials: int = 100, seed: int = 0,
                 gamma: float = 0.25, n_startup: int = 10,
                 n_candidates: int = 24) -> tuple[dict, TrialLog]:
    """Maximize ``objective(config)`` over the space.

    An objective may raise to mark a failed trial; failed trials are
    logged with score None and never enter the good set. All proposals
    are clamped in-bounds.
    """
    rng = np.random.default_rng(seed)
    samplers = {d.name: _sampler(d) for d in space.dims}
    trials: list[Trial] = []
    seen: set = set()

    def key(cfg):
        return tuple(sorted(cfg.items(), key=lambda kv: kv[0]))

    for i in range(n_trials):
        done = [t for t in trials if t.score is not None]
        if i < n_startup or len(done) < 2:
            config = {name: s.sample_uniform(rng) for name, s in samplers.items()}
        else:
            done_sorted = sorted(done, key=lambda t: -t.score)
            n_good = max(1, min(len(done_sorted) - 1, math.ceil(gamma * len(done_sorted))))
            good = done_sorted[:n_good]
            bad = done_sorted[n_good:]
            scored_cands = []
            for _ in range(n_candidates):
                cand = {name: s.sample_from(rng, [t.config[name] for t in good])
                        for name, s in samplers.items()}
                ratio = sum(
                    s.log_ratio(cand[name], [t.config[name] for t in good],
                                [t.config[name] for t in bad])
                    for name, s in samplers.items())
                scored_cands.append((ratio, cand))
            scored_cands.sort(key=lambda rc: -rc[0])
            # prefer an unevaluated config so discrete dims keep exploring
            config = next((c for _, c in scored_cands if key(c) not in seen),
                          scored_cands[0][1])
        if not space.contains(config):
            raise TuneError(f"proposal escaped the search space: {config}")
        seen.add(key(config))
        try:
            result = objective(config)
        except Exception:
            trials.append(Trial(i, config, None))
            continue
        if isinstance(result, tuple):
            score, fold_scores = result
        else:
            score, fold_scores = float(result), []
        trials.append(Trial(i, config, float(score), list(fold_scores)))

    scored = [t for t in trials if t.score is not None]
    if not scored:
        raise TuneError("all trials failed", )
    best = max(scored, key=lambda t: (t.score, -t.index))
    return best.config, TrialLog(trials, best.index)
