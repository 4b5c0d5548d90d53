import json

import numpy as np
import pytest

from exsurv import tune
from exsurv.models.cox import fit_cox_ridge


class TestSearchSpace:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            tune.SearchSpace([tune.IntDim("a", 1, 2), tune.FloatDim("a", 0.1, 1.0)])

    def test_contains(self):
        space = tune.SearchSpace([tune.IntDim("n", 1, 10),
                                  tune.CatDim("c", ("x", "y"))])
        assert space.contains({"n": 5, "c": "x"})
        assert not space.contains({"n": 11, "c": "x"})
        assert not space.contains({"n": 5, "c": "z"})

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            tune.IntDim("a", 5, 4)
        with pytest.raises(ValueError):
            tune.FloatDim("a", 1.0, 1.0)
        with pytest.raises(ValueError):
            tune.FloatDim("a", -1.0, 1.0, log=True)
        with pytest.raises(ValueError):
            tune.CatDim("a", ())

    def test_forest_space_shape(self):
        space = tune.forest_space(19)
        dims = {d.name: d for d in space.dims}
        assert dims["n_trees"].low == 50 and dims["n_trees"].high == 500
        assert dims["min_leaf_size"].low == 5 and dims["min_leaf_size"].high == 50
        assert None in dims["max_depth"].choices
        assert dims["features_per_split"].low == 2
        assert dims["features_per_split"].high == 19

    def test_cox_space_log(self):
        (d,) = tune.cox_space().dims
        assert d.log and d.low == pytest.approx(1e-4) and d.high == pytest.approx(1e2)


class TestStratifiedKfold:
    def test_partition_and_stratification(self):
        rng = np.random.default_rng(0)
        events = rng.random(200) < 0.35
        fa = tune.stratified_kfold(events, k=5, seed=3)
        allidx = np.sort(np.concatenate(fa.folds))
        assert np.array_equal(allidx, np.arange(200))
        per_fold_ev = [events[f].sum() for f in fa.folds]
        assert max(per_fold_ev) - min(per_fold_ev) <= 1

    def test_deterministic(self):
        events = np.arange(50) % 3 == 0
        f1 = tune.stratified_kfold(events, k=4, seed=9)
        f2 = tune.stratified_kfold(events, k=4, seed=9)
        for a, b in zip(f1.folds, f2.folds):
            assert np.array_equal(a, b)

    def test_k_too_large_rejected(self):
        events = np.array([True, True, False] * 2)
        with pytest.raises(tune.TuneError):
            tune.stratified_kfold(events, k=3)


class TestCvScore:
    def test_oracle_model_scores_near_one(self):
        rng = np.random.default_rng(1)
        n = 300
        X = rng.normal(size=(n, 1))
        T = np.exp(-2.0 * X[:, 0]) * rng.exponential(5.0, n)
        C = rng.exponential(10.0, n)
        times, events = np.minimum(T, C), T <= C

        def factory(config, Xtr, t, e):
            return fit_cox_ridge(Xtr, t, e, lam=0.1)

        folds = tune.stratified_kfold(events, k=5, seed=0)
        score, fold_scores = tune.cv_score(factory, {}, X, times, events, folds)
        assert score > 0.8
        assert len(fold_scores) == 5
        assert score == pytest.approx(np.mean(fold_scores))

    def test_random_model_near_half(self):
        rng = np.random.default_rng(2)
        n = 400
        X = rng.normal(size=(n, 1))
        times = rng.exponential(5.0, n)
        events = rng.random(n) < 0.6

        class Junk:
            def __init__(self, seed):
                self.rng = np.random.default_rng(seed)

            def risk_batch(self, X):
                return self.rng.normal(size=len(X))

        folds = tune.stratified_kfold(events, k=5, seed=0)
        score, _ = tune.cv_score(lambda c, X, t, e: Junk(0), {}, X, times,
                                 events, folds)
        assert abs(score - 0.5) < 0.1


class TestTpe:
    def quad(self, config):
        return -(config["x"] - 37.0) ** 2

    def test_beats_startup_phase_on_quadratic(self):
        space = tune.SearchSpace([tune.IntDim("x", 1, 100)])
        best, log = tune.tpe_optimize(space, self.quad, n_trials=60, seed=0)
        startup_best = max(t.score for t in log.trials[:10])
        assert log.best.score >= startup_best
        assert abs(best["x"] - 37) <= 2

    def test_quadratic_close_to_grid_oracle_many_seeds(self):
        space = tune.SearchSpace([tune.IntDim("x", 1, 100)])
        hits = 0
        for seed in range(30):
            best, _ = tune.tpe_optimize(space, self.quad, n_trials=60, seed=seed)
            hits += abs(best["x"] - 37) <= 2
        assert hits >= 27

    def test_deterministic_per_seed(self):
        space = tune.SearchSpace([tune.FloatDim("x", 0.0, 1.0)])
        b1, l1 = tune.tpe_optimize(space, lambda c: -abs(c["x"] - 0.3),
                                   n_trials=30, seed=5)
        b2, l2 = tune.tpe_optimize(space, lambda c: -abs(c["x"] - 0.3),
                                   n_trials=30, seed=5)
        assert b1 == b2
        assert [t.config for t in l1.trials] == [t.config for t in l2.trials]

    def test_log_dim_stays_in_bounds(self):
        space = tune.SearchSpace([tune.FloatDim("lam", 1e-4, 1e2, log=True)])
        best, log = tune.tpe_optimize(space, lambda c: -abs(np.log10(c["lam"]) + 1),
                                      n_trials=40, seed=1)
        for t in log.trials:
            assert 1e-4 <= t.config["lam"] <= 1e2
        assert 1e-3 < best["lam"] < 1.0

    def test_categorical_dim_optimized(self):
        space = tune.SearchSpace([tune.CatDim("c", ("a", "b", "c", "d"))])
        best, _ = tune.tpe_optimize(space, lambda cfg: 1.0 if cfg["c"] == "c" else 0.0,
                                    n_trials=40, seed=2)
        assert best["c"] == "c"

    def test_failed_trials_logged_and_excluded(self):
        space = tune.SearchSpace([tune.IntDim("x", 1, 100)])

        def flaky(config):
            if config["x"] % 2 == 0:
                raise RuntimeError("boom")
            return -(config["x"] - 37.0) ** 2

        best, log = tune.tpe_optimize(space, flaky, n_trials=50, seed=3)
        assert any(t.score is None for t in log.trials)
        assert best["x"] % 2 == 1

    def test_all_failures_raise(self):
        space = tune.SearchSpace([tune.IntDim("x", 1, 10)])

        def dead(config):
            raise RuntimeError("no")

        with pytest.raises(tune.TuneError):
            tune.tpe_optimize(space, dead, n_trials=5, seed=0)

    def test_best_so_far_monotone(self):
        space = tune.SearchSpace([tune.IntDim("x", 1, 100)])
        _, log = tune.tpe_optimize(space, self.quad, n_trials=40, seed=7)
        trace = log.best_so_far()
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_jsonl_round_trip(self, tmp_path):
        space = tune.SearchSpace([tune.IntDim("x", 1, 100),
                                  tune.CatDim("d", (None, 5))])
        _, log = tune.tpe_optimize(space, lambda c: float(c["x"]), n_trials=15,
                                   seed=4)
        path = tmp_path / "trials.jsonl"
        log.save_jsonl(path)
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(lines) == 15
        assert lines[-1]["index"] == 14
        assert all(set(l) == {"index", "config", "score", "fold_scores"}
                   for l in lines)
