import numpy as np
import pytest

from exsurv import explain as ex


class TestKernelShapExact:
    def test_linear_model_closed_form(self):
        # for f(x) = a @ x with marginal replacement, phi_j = a_j (x_j - mean(b_j))
        rng = np.random.default_rng(0)
        p = 6
        a = rng.normal(size=p)
        B = rng.normal(size=(40, p))
        x = rng.normal(size=p)
        f = lambda X: X @ a
        e = ex.kernel_shap(f, x, B)
        expected = a * (x - B.mean(axis=0))
        assert np.allclose(e.phi, expected, atol=1e-10)
        assert e.base_value == pytest.approx(float(B.mean(axis=0) @ a), abs=1e-12)

    def test_dummy_feature_zero_phi(self):
        rng = np.random.default_rng(1)
        B = rng.normal(size=(30, 4))
        x = rng.normal(size=4)
        f = lambda X: X[:, 0] * 2.0 + np.sin(X[:, 1])  # ignores features 2, 3
        e = ex.kernel_shap(f, x, B)
        assert abs(e.phi[2]) < 1e-10
        assert abs(e.phi[3]) < 1e-10

    def test_symmetry_axiom(self):
        # two features used identically get identical phi when x matches
        rng = np.random.default_rng(2)
        B = rng.normal(size=(25, 3))
        B[:, 1] = B[:, 0]  # matched background marginals
        x = np.array([0.7, 0.7, -0.2])
        f = lambda X: X[:, 0] + X[:, 1] + 0.5 * X[:, 2] ** 2
        e = ex.kernel_shap(f, x, B)
        assert e.phi[0] == pytest.approx(e.phi[1], abs=1e-10)

    def test_local_accuracy_nonlinear(self):
        rng = np.random.default_rng(3)
        B = rng.normal(size=(50, 5))
        x = rng.normal(size=5)
        f = lambda X: np.exp(0.3 * X[:, 0]) + X[:, 1] * X[:, 2] - np.abs(X[:, 3])
        e = ex.kernel_shap(f, x, B)
        assert e.residual() < 1e-6

    def test_single_feature_shortcut(self):
        B = np.array([[1.0], [2.0], [3.0]])
        f = lambda X: X[:, 0] ** 2
        e = ex.kernel_shap(f, np.array([4.0]), B)
        base = np.mean([1.0, 4.0, 9.0])
        assert e.phi[0] == pytest.approx(16.0 - base, abs=1e-12)
        assert e.residual() == 0.0

    def test_seed_independent_when_exact(self):
        rng = np.random.default_rng(4)
        B = rng.normal(size=(20, 5))
        x = rng.normal(size=5)
        f = lambda X: np.tanh(X).sum(axis=1)
        e1 = ex.kernel_shap(f, x, B, seed=1)
        e2 = ex.kernel_shap(f, x, B, seed=999)
        assert np.array_equal(e1.phi, e2.phi)

    def test_empty_background_rejected(self):
        with pytest.raises(ValueError):
            ex.kernel_shap(lambda X: X[:, 0], np.array([1.0]),
                           np.empty((0, 1)))

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ex.kernel_shap(lambda X: X[:, 0], np.array([1.0]), np.ones((5, 2)))


class TestKernelShapSampled:
    def test_sampled_close_to_exact_at_boundary(self):
        # p=10 allows exact enumeration; compare a forced-sampled run to it
        rng = np.random.default_rng(5)
        p = 10
        a = rng.normal(size=p)
        B = rng.normal(size=(30, p))
        x = rng.normal(size=p)
        f = lambda X: X @ a + 0.1 * (X[:, 0] * X[:, 1])
        exact = ex.kernel_shap(f, x, B)
        Z, w = ex._coalition_matrix_sampled(p, 4096, np.random.default_rng(0))
        vals = ex._coalition_values(f, x, Z, B)
        base = float(np.mean(f(B)))
        fx = float(f(x.reshape(1, -1))[0])
        phi = ex._solve_constrained_wls(Z, w, vals, base, fx)
        assert np.allclose(phi, exact.phi, atol=0.05)
        assert abs(base + phi.sum() - fx) < 1e-6

    def test_large_p_local_accuracy(self):
        rng = np.random.default_rng(6)
        p = 19
        B = rng.normal(size=(25, p))
        x = rng.normal(size=p)
        a = rng.normal(size=p)
        f = lambda X: X @ a
        e = ex.kernel_shap(f, x, B, seed=2)
        assert e.residual() < 1e-6
        # linear closed form still holds approximately under sampling
        expected = a * (x - B.mean(axis=0))
        assert np.allclose(e.phi, expected, atol=0.05)

    def test_large_p_deterministic_per_seed(self):
        rng = np.random.default_rng(7)
        p = 15
        B = rng.normal(size=(20, p))
        x = rng.normal(size=p)
        f = lambda X: np.tanh(X).sum(axis=1)
        e1 = ex.kernel_shap(f, x, B, seed=3)
        e2 = ex.kernel_shap(f, x, B, seed=3)
        assert np.array_equal(e1.phi, e2.phi)


class TestPopulationAndViews:
    def test_population_seeds_stable(self):
        rng = np.random.default_rng(8)
        p = 14
        B = rng.normal(size=(15, p))
        rows = rng.normal(size=(3, p))
        f = lambda X: (X ** 2).sum(axis=1)
        e1 = ex.explain_population(f, rows, B, seed=11)
        e2 = ex.explain_population(f, rows, B, seed=11)
        for a, b in zip(e1, e2):
            assert np.array_equal(a.phi, b.phi)

    def test_population_failure_names_row(self):
        B = np.ones((5, 2))
        rows = np.ones((2, 2))

        calls = {"n": 0}

        def f(X):
            calls["n"] += 1
            out = X[:, 0].copy()
            if calls["n"] > 3:
                raise FloatingPointError("synthetic failure")
            return out

        with pytest.raises(RuntimeError, match="row 1"):
            ex.explain_population(f, rows, B, seed=0)

    def test_global_importance_order_and_ties(self):
        e1 = ex.ShapExplanation(0.0, np.array([0.5, -1.0, 0.5]), 0.0,
                                ["b", "a", "c"], np.zeros(3))
        e2 = ex.ShapExplanation(0.0, np.array([-0.5, 1.0, 0.5]), 1.0,
                                ["b", "a", "c"], np.zeros(3))
        gi = ex.global_importance([e1, e2])
        assert gi.names == ["a", "b", "c"]
        assert gi.mean_abs_phi == [1.0, 0.5, 0.5]

    def test_waterfall_path_sums_to_prediction(self):
        rng = np.random.default_rng(9)
        B = rng.normal(size=(20, 4))
        x = rng.normal(size=4)
        f = lambda X: X[:, 0] - 2 * X[:, 2]
        e = ex.kernel_shap(f, x, B)
        wf = ex.waterfall_data(e)
        assert wf["path_end"] == pytest.approx(e.prediction, abs=1e-6)
        mags = [abs(s["phi"]) for s in wf["steps"]]
        assert mags == sorted(mags)
        assert wf["steps"][0]["from"] == pytest.approx(e.base_value)


class TestSignThreshold:
    def test_known_crossing_recovered(self):
        values = np.linspace(0, 100, 400)
        phi = values - 64.0  # negative below 64, positive above
        thr, note = ex.sign_change_threshold(values, phi, "age")
        assert thr is not None
        assert thr.direction == "risk_increases_above"
        assert abs(thr.crossing - 64.0) < 2.0

    def test_decreasing_direction(self):
        values = np.linspace(0, 10, 300)
        phi = 5.0 - values
        thr, _ = ex.sign_change_threshold(values, phi, "egfr")
        assert thr.direction == "risk_increases_below"
        assert abs(thr.crossing - 5.0) < 0.5

    def test_all_positive_no_threshold(self):
        values = np.linspace(0, 10, 200)
        thr, note = ex.sign_change_threshold(values, np.ones(200), "x")
        assert thr is None
        assert note == "no sign change"

    def test_multiple_crossings_flagged(self):
        values = np.linspace(0, 4 * np.pi, 400)
        phi = np.sin(values)
        thr, note = ex.sign_change_threshold(values, phi, "x")
        assert thr is None
        assert "non-monotone" in note

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            ex.sign_change_threshold(np.arange(10.0), np.arange(10.0), "x")


class TestRiskGroups:
    def test_separated_groups_low_p(self):
        rng = np.random.default_rng(10)
        n = 200
        risks = np.concatenate([np.zeros(n // 2), np.ones(n // 2)])
        times = np.concatenate([rng.uniform(20, 30, n // 2),
                                rng.uniform(1, 5, n // 2)])
        events = np.ones(n, dtype=bool)
        out = ex.risk_group_analysis(risks, risks, times, events)
        assert out["log_rank"]["p_value"] < 1e-10
        assert set(out["labels"]) == {"high", "low"}
        assert out["km_curves"]["high"] is not None

    def test_median_cut_from_train_not_eval(self):
        train = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        ev = np.array([10.0, 10.0])
        out = ex.risk_group_analysis(train, np.array([1.0, 3.0]),
                                     np.array([5.0, 6.0]),
                                     np.array([True, True]))
        assert out["median_cut"] == 2.0
        assert out["labels"] == ["low", "high"]

    def test_empty_group_flagged(self):
        out = ex.risk_group_analysis(np.array([0.0]), np.array([5.0, 6.0]),
                                     np.array([1.0, 2.0]),
                                     np.array([True, True]))
        assert out["log_rank"]["degenerate"]
        assert out["km_curves"]["low"] is None
