import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from exsurv.cli import main
from exsurv.models import ModelArtifact


def run(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    return result


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small end-to-end pipeline shared by the read-only assertions."""
    root = tmp_path_factory.mktemp("pipe")
    d = {k: root / k for k in
         ("raw", "prep", "sel", "tune", "train", "eval", "explain")}

    r = run(["synth", "--n", "220", "--p", "6", "--informative", "3",
             "--censoring", "0.4", "--seed", "3", "--out", str(d["raw"])])
    assert r.exit_code == 0, r.output
    r = run(["preprocess", "--input", str(d["raw"] / "cohort.csv"),
             "--schema", str(d["raw"] / "schema.json"),
             "--seed", "0", "--out", str(d["prep"])])
    assert r.exit_code == 0, r.output
    r = run(["select", "--train", str(d["prep"] / "train.csv"),
             "--schema", str(d["prep"] / "schema.json"),
             "--model", "CoxRidge", "--out", str(d["sel"])])
    assert r.exit_code == 0, r.output
    r = run(["tune", "--train", str(d["prep"] / "train.csv"),
             "--schema", str(d["prep"] / "schema.json"),
             "--model", "EST", "--selection", str(d["sel"] / "selection.json"),
             "--trials", "12", "--seed", "1", "--out", str(d["tune"])])
    assert r.exit_code == 0, r.output
    r = run(["train", "--train", str(d["prep"] / "train.csv"),
             "--schema", str(d["prep"] / "schema.json"),
             "--normalization", str(d["prep"] / "normalization.json"),
             "--model", "EST", "--config", str(d["tune"] / "best_config.json"),
             "--seed", "1", "--out", str(d["train"])])
    assert r.exit_code == 0, r.output
    r = run(["evaluate", "--artifact", str(d["train"] / "artifact.json"),
             "--train", str(d["prep"] / "train.csv"),
             "--test", str(d["prep"] / "test.csv"),
             "--schema", str(d["prep"] / "schema.json"),
             "--oracle", str(d["raw"] / "truth.json"),
             "--split", str(d["prep"] / "split.json"),
             "--out", str(d["eval"])])
    assert r.exit_code == 0, r.output
    r = run(["explain", "--artifact", str(d["train"] / "artifact.json"),
             "--data", str(d["prep"] / "test.csv"),
             "--schema", str(d["prep"] / "schema.json"),
             "--seed", "2", "--out", str(d["explain"])])
    assert r.exit_code == 0, r.output
    return d


class TestPipelineArtifacts:
    def test_every_stage_writes_run_config(self, pipeline):
        for stage, path in pipeline.items():
            doc = json.loads((path / "run_config.json").read_text())
            assert "command" in doc and "params" in doc

    def test_preprocess_outputs(self, pipeline):
        p = pipeline["prep"]
        for name in ("train.csv", "test.csv", "schema.json", "split.json",
                     "normalization.json", "sparse_report.json",
                     "sample_report.json", "baseline_comparison.json"):
            assert (p / name).exists(), name
        split = json.loads((p / "split.json").read_text())
        assert len(split["original_rows_train"]) + len(split["original_rows_test"]) == 220
        assert abs(split["train_event_frac"] - split["test_event_frac"]) < 0.05

    def test_selection_recovers_signal(self, pipeline):
        doc = json.loads((pipeline["sel"] / "selection.json").read_text())
        selected = doc["forward_selected"]
        assert selected, "no features selected"
        # informative features lead the synthetic signal
        assert any(n in ("f000", "f001", "f002") for n in selected)
        assert len(doc["rankings"]) == 3
        assert doc["cox_screen"]

    def test_tune_log_complete(self, pipeline):
        lines = (pipeline["tune"] / "trials.jsonl").read_text().splitlines()
        assert len(lines) == 12
        best = json.loads((pipeline["tune"] / "best_config.json").read_text())
        assert best["model"] == "EST"
        assert 0.0 <= best["cv_c_index"] <= 1.0
        assert {"n_trees", "min_leaf_size", "max_depth",
                "features_per_split"} <= set(best["config"])

    def test_artifact_loads_and_predicts(self, pipeline):
        art = ModelArtifact.load(pipeline["train"] / "artifact.json")
        assert art.kind == "EST"
        assert art.horizon_days == pytest.approx(6142.0)
        assert art.background.shape[1] == len(art.feature_names)
        x = art.background[0]
        assert np.isfinite(art.risk(x))
        prob = art.mortality_probability(x)
        assert 0.0 <= prob <= 1.0

    def test_report_sorted_and_oracle_row_present(self, pipeline):
        rows = json.loads((pipeline["eval"] / "report.json").read_text())
        assert {r["model"] for r in rows} == {"EST", "Oracle"}
        cvs = [r["c_cv"] for r in rows if r["c_cv"] is not None]
        assert cvs == sorted(cvs, reverse=True)
        est = next(r for r in rows if r["model"] == "EST")
        assert set(est["auc_test"]) == {"5y", "10y", "15y", "16.8y"}
        assert est["c_test"] > 0.6
        oracle = next(r for r in rows if r["model"] == "Oracle")
        assert oracle["c_test"] > 0.6

    def test_auc_curve_csv(self, pipeline):
        lines = (pipeline["eval"] / "auc_curve_EST.csv").read_text().splitlines()
        assert lines[0] == "t_days,auc,n_cases,n_controls"
        assert len(lines) > 2

    def test_risk_groups_json(self, pipeline):
        doc = json.loads((pipeline["eval"] / "risk_groups.json").read_text())
        assert "EST" in doc and "Oracle" in doc
        assert "log_rank" in doc["EST"]["test"]

    def test_explanations_local_accuracy(self, pipeline):
        p = pipeline["explain"]
        files = sorted(p.glob("explanation_*.json"))
        assert files
        for f in files[:5]:
            doc = json.loads(f.read_text())
            total = doc["base"] + sum(item["phi"] for item in doc["phi"])
            assert abs(total - doc["prediction"]) < 1e-6

    def test_waterfall_and_globals(self, pipeline):
        p = pipeline["explain"]
        gi = json.loads((p / "global_importance.json").read_text())
        assert gi and all({"feature", "mean_abs_phi"} <= set(r) for r in gi)
        wf = json.loads(next(iter(sorted(p.glob("waterfall_*.json")))).read_text())
        assert wf["path_end"] == pytest.approx(wf["prediction"], abs=1e-6)
        assert (p / "beeswarm.csv").exists()
        assert (p / "thresholds.json").exists()


class TestReproducibility:
    def test_same_seed_same_artifact(self, tmp_path):
        raw, prep = tmp_path / "raw", tmp_path / "prep"
        run(["synth", "--n", "120", "--p", "4", "--seed", "9", "--out", str(raw)])
        run(["preprocess", "--input", str(raw / "cohort.csv"),
             "--schema", str(raw / "schema.json"), "--out", str(prep)])
        arts = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            r = run(["train", "--train", str(prep / "train.csv"),
                     "--schema", str(prep / "schema.json"),
                     "--normalization", str(prep / "normalization.json"),
                     "--model", "RSF", "--seed", "7", "--out", str(out)])
            assert r.exit_code == 0, r.output
            arts.append(json.loads((out / "artifact.json").read_text()))
        assert arts[0]["model"] == arts[1]["model"]

    def test_same_seed_same_synth(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            run(["synth", "--n", "80", "--p", "3", "--seed", "4", "--out", str(out)])
            outs.append((out / "cohort.csv").read_text())
        assert outs[0] == outs[1]


class TestErrorHandling:
    def test_validation_error_exit_2_json_stderr(self, tmp_path):
        raw = tmp_path / "raw"
        run(["synth", "--n", "80", "--p", "3", "--seed", "0", "--out", str(raw)])
        bad = tmp_path / "bad.csv"
        bad.write_text("f000,time_days,event\n1.0,0,1\n")  # zero time
        result = CliRunner().invoke(
            main, ["preprocess", "--input", str(bad),
                   "--schema", str(raw / "schema.json"),
                   "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        err = json.loads(result.stderr.strip().splitlines()[-1])
        assert err["error"] == "validation"

    def test_unknown_prior_exit_2(self, tmp_path):
        raw, prep = tmp_path / "raw", tmp_path / "prep"
        run(["synth", "--n", "120", "--p", "4", "--seed", "1", "--out", str(raw)])
        run(["preprocess", "--input", str(raw / "cohort.csv"),
             "--schema", str(raw / "schema.json"), "--out", str(prep)])
        result = CliRunner().invoke(
            main, ["select", "--train", str(prep / "train.csv"),
                   "--schema", str(prep / "schema.json"),
                   "--priors", "not_a_feature",
                   "--out", str(tmp_path / "sel")])
        assert result.exit_code == 2

    def test_evaluate_without_inputs_exit_2(self, tmp_path):
        raw, prep = tmp_path / "raw", tmp_path / "prep"
        run(["synth", "--n", "120", "--p", "4", "--seed", "1", "--out", str(raw)])
        run(["preprocess", "--input", str(raw / "cohort.csv"),
             "--schema", str(raw / "schema.json"), "--out", str(prep)])
        result = CliRunner().invoke(
            main, ["evaluate", "--train", str(prep / "train.csv"),
                   "--test", str(prep / "test.csv"),
                   "--schema", str(prep / "schema.json"),
                   "--out", str(tmp_path / "eval")])
        assert result.exit_code == 2

    def test_oracle_requires_split(self, tmp_path):
        raw, prep = tmp_path / "raw", tmp_path / "prep"
        run(["synth", "--n", "120", "--p", "4", "--seed", "1", "--out", str(raw)])
        run(["preprocess", "--input", str(raw / "cohort.csv"),
             "--schema", str(raw / "schema.json"), "--out", str(prep)])
        result = CliRunner().invoke(
            main, ["evaluate", "--oracle", str(raw / "truth.json"),
                   "--train", str(prep / "train.csv"),
                   "--test", str(prep / "test.csv"),
                   "--schema", str(prep / "schema.json"),
                   "--out", str(tmp_path / "eval")])
        assert result.exit_code == 2


class TestExplainOptions:
    def test_row_subset_and_artifact_update(self, pipeline, tmp_path):
        import shutil
        art_copy = tmp_path / "artifact.json"
        shutil.copy(pipeline["train"] / "artifact.json", art_copy)
        out = tmp_path / "exp"
        r = run(["explain", "--artifact", str(art_copy),
                 "--data", str(pipeline["prep"] / "test.csv"),
                 "--schema", str(pipeline["prep"] / "schema.json"),
                 "--row", "0,2", "--update-artifact",
                 "--out", str(out)])
        assert r.exit_code == 0, r.output
        assert (out / "explanation_0.json").exists()
        assert (out / "explanation_2.json").exists()
        assert not (out / "explanation_1.json").exists()
        art = json.loads(art_copy.read_text())
        assert "thresholds" in art
