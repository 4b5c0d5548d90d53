"""Pipeline driver.

Subcommands: synth, preprocess, select, tune, train, evaluate, explain.
Every command writes the exact RunConfig that produced its outputs into
the output directory, so any stage can be rerun from its predecessor's
artifacts. Plot outputs are data files (CSV/JSON), never images.

Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors
are emitted as machine-readable JSON on stderr.
"""

from __future__ import annotations

import csv as csv_mod
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as ds
from . import explain as ex
from . import featselect as fs
from . import metrics as mt
from . import synth as sy
from . import tune as tn
from .models import (CoxConvergenceError, FeatureMeta, ModelArtifact,
                     ForestHyperparams, fit_cox_ridge, fit_forest)

YEAR_DAYS = 365.25
AUC_HORIZONS_DAYS = {"5y": 5 * YEAR_DAYS, "10y": 10 * YEAR_DAYS,
                     "15y": 15 * YEAR_DAYS, "16.8y": sy.DEFAULT_HORIZON_DAYS}


def _fail(code: int, kind: str, message: str):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CoxConvergenceError, mt.MetricError, tn.TuneError,
                np.linalg.LinAlgError, FloatingPointError) as exc:
            _fail(3, "numerical", str(exc))
        except (ds.CohortError, ValueError) as exc:
            _fail(2, "validation", str(exc))
    return wrapper


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)


def _write_run_config(out: Path, command: str, params: dict):
    doc = {"command": command,
           "params": {k: (str(v) if isinstance(v, Path) else v)
                      for k, v in params.items()}}
    _write_json(out / "run_config.json", doc)


def _load_processed(data_path, schema_path):
    cohort = ds.load_cohort(data_path, ds.read_schema(schema_path))
    X, names = cohort.to_model_matrix()
    return cohort, X, names


@click.group()
def main():
    """Explainable survival-analysis pipeline."""


# ---------------------------------------------------------------------------
# synth


@main.command("synth")
@click.option("--preset", type=click.Choice(["reference", "nonlinear"]), default=None)
@click.option("--n", type=int, default=500)
@click.option("--p", type=int, default=10)
@click.option("--informative", type=int, default=3)
@click.option("--censoring", type=float, default=0.5)
@click.option("--incomplete-rows", type=int, default=0)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_synth(preset, n, p, informative, censoring, incomplete_rows, seed, out):
    """Generate a synthetic cohort with known ground truth."""
    out.mkdir(parents=True, exist_ok=True)
    if preset == "reference":
        spec = sy.reference_cohort_spec(seed=seed, n_incomplete_required=incomplete_rows)
    elif preset == "nonlinear":
        spec = sy.nonlinear_spec(n=n, seed=seed)
    else:
        beta = np.zeros(p)
        mags = 0.9 - 0.15 * np.arange(informative)
        beta[:informative] = np.where(np.arange(informative) % 2, -1, 1) * np.clip(mags, 0.3, None)
        spec = sy.CohortSpec(n=n, p=p, beta=beta, censoring_target=censoring,
                             n_incomplete_required=incomplete_rows, seed=seed)
    cohort, truth = sy.generate_cohort(spec)
    ds.write_cohort(out / "cohort.csv", cohort)
    ds.write_schema(out / "schema.json", cohort.features)
    truth.save(out / "truth.json")
    _write_run_config(out, "synth", dict(preset=preset, n=n, p=p, informative=informative,
                                         censoring=censoring,
                                         incomplete_rows=incomplete_rows, seed=seed))
    click.echo(f"wrote {cohort.n}x{cohort.p} cohort to {out}")


# ---------------------------------------------------------------------------
# preprocess


@main.command("preprocess")
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--max-missing-frac", type=float, default=0.20, show_default=True)
@click.option("--train-frac", type=float, default=0.8, show_default=True)
@click.option("--knn", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_preprocess(input_path, schema, max_missing_frac, train_frac, knn, seed, out):
    """Fixed-order preprocessing: sparse drop, sample drop, split,
    normalize, impute; plus the alive-vs-deceased baseline table."""
    out.mkdir(parents=True, exist_ok=True)
    cohort = ds.load_cohort(input_path, ds.read_schema(schema))

    cohort, sparse_report = ds.drop_sparse_features(cohort, max_missing_frac)
    required = [f.name for f in cohort.features if f.required]
    kept_rows = np.arange(cohort.n)
    cohort, sample_report = ds.drop_incomplete_samples(cohort, required)
    kept_rows = np.delete(kept_rows, sample_report["removed_rows"])

    split = ds.stratified_split(cohort, train_frac, seed)
    norm = ds.fit_normalizer(cohort, split.train)
    normalized = ds.apply_normalizer(cohort, norm)
    train = normalized.subset_rows(split.train)
    test = normalized.subset_rows(split.test)
    train = ds.knn_impute(train, k=knn)
    test = ds.knn_impute(test, k=knn, donors=train)

    baseline = ds.baseline_group_comparison(cohort)

    ds.write_cohort(out / "train.csv", train)
    ds.write_cohort(out / "test.csv", test)
    ds.write_schema(out / "schema.json", cohort.features)
    _write_json(out / "split.json", {
        **split.to_dict(),
        "original_rows_train": kept_rows[split.train].tolist(),
        "original_rows_test": kept_rows[split.test].tolist(),
        "train_event_frac": float(cohort.events[split.train].mean()),
        "test_event_frac": float(cohort.events[split.test].mean()),
    })
    _write_json(out / "normalization.json", norm.to_dict())
    _write_json(out / "sparse_report.json", sparse_report)
    _write_json(out / "sample_report.json", sample_report)
    _write_json(out / "baseline_comparison.json", baseline)
    _write_run_config(out, "preprocess", dict(
        input=input_path, schema=schema, max_missing_frac=max_missing_frac,
        train_frac=train_frac, knn=knn, seed=seed))
    click.echo(f"train {train.n} rows / test {test.n} rows, "
               f"{train.p} features -> {out}")


# ---------------------------------------------------------------------------
# model factories


def _forest_factory(kind, seed):
    def factory(config, X, times, events):
        hp = ForestHyperparams(
            n_trees=int(config.get("n_trees", 100)),
            min_leaf_size=int(config.get("min_leaf_size", 10)),
            max_depth=config.get("max_depth"),
            features_per_split=(int(config["features_per_split"])
                                if config.get("features_per_split") else None),
        )
        return fit_forest(X, times, events, hp, kind=kind, seed=seed)
    return factory


def _cox_factory():
    def factory(config, X, times, events):
        return fit_cox_ridge(X, times, events, lam=float(config.get("lam", 1.0)))
    return factory


def make_factory(model_kind: str, seed: int):
    if model_kind == "CoxRidge":
        return _cox_factory()
    return _forest_factory(model_kind, seed)


def default_config(model_kind: str) -> dict:
    return {"lam": 1.0} if model_kind == "CoxRidge" else {"n_trees": 100,
                                                          "min_leaf_size": 10}


def search_space(model_kind: str, n_features: int) -> tn.SearchSpace:
    return tn.cox_space() if model_kind == "CoxRidge" else tn.forest_space(n_features)


MODEL_KINDS = ["EST", "RSF", "CoxRidge"]


# ---------------------------------------------------------------------------
# select


@main.command("select")
@click.option("--train", "train_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "model_kind", type=click.Choice(MODEL_KINDS), default="EST")
@click.option("--priors", default="", help="comma-separated prior feature names")
@click.option("--keep-frac", type=float, default=0.5, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--min-improvement", type=float, default=1e-4, show_default=True)
@click.option("--fs-tune-trials", type=int, default=0, show_default=True,
              help="TPE trials per candidate subset during forward selection "
                   "(0 = fixed default hyperparameters)")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_select(train_path, schema, model_kind, priors, keep_frac, alpha,
               min_improvement, fs_tune_trials, folds, seed, out):
    """Four-filter ensemble, intersection, priors, forward selection."""
    out.mkdir(parents=True, exist_ok=True)
    cohort, X, names = _load_processed(train_path, schema)
    cont_mask = np.array([("=" not in n) for n in names])
    prior_names = [p.strip() for p in priors.split(",") if p.strip()]
    for p_name in prior_names:
        if p_name not in names:
            raise ds.CohortError(f"unknown prior feature {p_name!r}")

    mi = fs.mutual_information_rank(X, cohort.events, names, cont_mask)
    surf = fs.surf_relieff_rank(X, cohort.events, names)
    mrmr = fs.mrmr_rank(X, cohort.events, names, continuous_mask=cont_mask)
    cox_set, cox_table = fs.univariate_cox_screen(X, cohort.times, cohort.events,
                                                  names, alpha)
    combined = fs.combine_filters([mi, surf, mrmr], cox_set, keep_frac)
    combined = fs.inject_priors(combined, prior_names, names)

    fold_assign = tn.stratified_kfold(cohort.events, k=folds, seed=seed)
    base_factory = make_factory(model_kind, seed)
    if fs_tune_trials > 0:
        def factory(config, Xs, ts, es):
            space = search_space(model_kind, Xs.shape[1])
            inner_folds = tn.stratified_kfold(es, k=min(folds, 3), seed=seed)

            def objective(cfg):
                return tn.cv_score(base_factory, cfg, Xs, ts, es, inner_folds)

            best, _ = tn.tpe_optimize(space, objective, n_trials=fs_tune_trials,
                                      seed=seed)
            return base_factory(best, Xs, ts, es)
    else:
        factory = base_factory

    selected, trace = fs.forward_select(
        combined.candidates, factory, X, cohort.times, cohort.events,
        fold_assign, names, min_improvement)

    doc = {
        "model": model_kind,
        "rankings": [r.to_dict() for r in (mi, surf, mrmr)],
        "cox_screen": cox_table,
        "selection": combined.to_dict(),
        "forward_selected": selected,
        "forward_trace": trace,
    }
    _write_json(out / "selection.json", doc)
    _write_run_config(out, "select", dict(
        train=train_path, schema=schema, model=model_kind, priors=priors,
        keep_frac=keep_frac, alpha=alpha, min_improvement=min_improvement,
        fs_tune_trials=fs_tune_trials, folds=folds, seed=seed))
    click.echo(f"selected {len(selected)} features: {', '.join(selected)}")


# ---------------------------------------------------------------------------
# tune / train


def _resolve_features(features_arg, selection_path, all_names):
    if features_arg:
        names = [f.strip() for f in features_arg.split(",") if f.strip()]
    elif selection_path:
        with open(selection_path, encoding="utf-8") as fh:
            names = json.load(fh)["forward_selected"]
    else:
        names = list(all_names)
    for n in names:
        if n not in all_names:
            raise ds.CohortError(f"unknown feature {n!r}")
    return names


@main.command("tune")
@click.option("--train", "train_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "model_kind", type=click.Choice(MODEL_KINDS), default="EST")
@click.option("--features", default="", help="comma-separated; default: all")
@click.option("--selection", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_tune(train_path, schema, model_kind, features, selection, trials, folds,
             seed, out):
    """TPE search over stratified k-fold CV C-index."""
    out.mkdir(parents=True, exist_ok=True)
    cohort, X, names = _load_processed(train_path, schema)
    use = _resolve_features(features, selection, names)
    cols = [names.index(n) for n in use]
    Xs = X[:, cols]
    fold_assign = tn.stratified_kfold(cohort.events, k=folds, seed=seed)
    factory = make_factory(model_kind, seed)
    space = search_space(model_kind, len(cols))

    def objective(config):
        return tn.cv_score(factory, config, Xs, cohort.times, cohort.events, fold_assign)

    best, log = tn.tpe_optimize(space, objective, n_trials=trials, seed=seed)
    log.save_jsonl(out / "trials.jsonl")
    _write_json(out / "best_config.json", {
        "model": model_kind, "features": use, "config": tn._jsonable(best),
        "cv_c_index": log.best.score, "fold_scores": log.best.fold_scores,
        "note": "TPE uses independent per-dimension Parzen estimators",
    })
    _write_run_config(out, "tune", dict(train=train_path, schema=schema,
                                        model=model_kind, features=features,
                                        selection=selection, trials=trials,
                                        folds=folds, seed=seed))
    click.echo(f"best CV C-index {log.best.score:.4f} with {tn._jsonable(best)}")


@main.command("train")
@click.option("--train", "train_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--normalization", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--model", "model_kind", type=click.Choice(MODEL_KINDS), default="EST")
@click.option("--features", default="")
@click.option("--selection", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="best_config.json from tune")
@click.option("--horizon-days", type=float, default=sy.DEFAULT_HORIZON_DAYS,
              show_default=True)
@click.option("--background-cap", type=int, default=0,
              help="subsample the surviving-patient SHAP background (0 = all)")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_train(train_path, schema, normalization, model_kind, features, selection,
              config_path, horizon_days, background_cap, seed, out):
    """Fit the final model and write the versioned artifact."""
    out.mkdir(parents=True, exist_ok=True)
    cohort, X, names = _load_processed(train_path, schema)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            best = json.load(fh)
        config = best["config"]
        if not features and not selection and best.get("features"):
            features = ",".join(best["features"])
    else:
        config = default_config(model_kind)
    use = _resolve_features(features, selection, names)
    cols = [names.index(n) for n in use]
    Xs = X[:, cols]

    factory = make_factory(model_kind, seed)
    model = factory(config, Xs, cohort.times, cohort.events)
    if hasattr(model, "feature_names"):
        model.feature_names = use

    norm = ds.NormalizationStats.from_dict(json.load(open(normalization)))
    norm_by_name = {n: i for i, n in enumerate(norm.feature_names)}
    metas = []
    for name, col in zip(use, cols):
        base_name = name.split("=")[0]
        j = norm_by_name.get(base_name)
        is_cont = "=" not in name and j is not None and bool(norm.normalized[j])
        mean = float(norm.mean[j]) if is_cont else 0.0
        std = float(norm.std[j]) if is_cont else 1.0
        vals = X[:, col] * std + mean
        metas.append(FeatureMeta(
            name=name, kind="continuous" if "=" not in name else "binary",
            required=False, mean=mean, std=std, normalized=is_cont,
            plausible_min=float(np.min(vals)), plausible_max=float(np.max(vals)),
        ))

    survivors = Xs[~cohort.events]
    if background_cap and survivors.shape[0] > background_cap:
        rng = np.random.default_rng(seed)
        survivors = survivors[rng.choice(survivors.shape[0], background_cap,
                                         replace=False)]
    donors = Xs if Xs.shape[0] <= 200 else Xs[
        np.random.default_rng(seed).choice(Xs.shape[0], 200, replace=False)]

    risks = np.asarray(model.risk_batch(Xs), dtype=float)
    c_train = mt.harrell_cindex(risks, cohort.times, cohort.events).c_index
    artifact = ModelArtifact(
        model=model, features=metas, horizon_days=horizon_days, seed=seed,
        background=survivors, donors=donors,
        training_summary={
            "n_train": cohort.n, "n_events": int(cohort.events.sum()),
            "c_train": float(c_train), "median_train_risk": float(np.median(risks)),
            "config": tn._jsonable(config), "model": model_kind,
        },
    )
    artifact.save(out / "artifact.json")
    _write_run_config(out, "train", dict(
        train=train_path, schema=schema, normalization=normalization,
        model=model_kind, features=features, selection=selection,
        config=config_path, horizon_days=horizon_days,
        background_cap=background_cap, seed=seed))
    click.echo(f"trained {model_kind} on {len(use)} features "
               f"(train C-index {c_train:.4f}) -> {out / 'artifact.json'}")


# ---------------------------------------------------------------------------
# evaluate


def _evaluate_risks(label, n_features, risks_train, risks_test, train, test,
                    cv_c=None, surv_test=None, grid=None, horizon=None):
    row = {"model": label, "n_features": n_features,
           "c_cv": cv_c,
           "c_train": mt.harrell_cindex(risks_train, train.times,
                                        train.events).c_index,
           "c_test": mt.harrell_cindex(risks_test, test.times, test.events).c_index}
    aucs = {}
    for key, horizon_days in AUC_HORIZONS_DAYS.items():
        res = mt.time_dependent_auc(risks_test, test.times, test.events, horizon_days)
        aucs[key] = res.auc
    row["auc_test"] = aucs
    if surv_test is not None:
        row["ibs_test"] = mt.brier_ibs(surv_test, test.times, test.events, grid).ibs
    return row


@main.command("evaluate")
@click.option("--artifact", "artifacts", multiple=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--train", "train_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--oracle", type=click.Path(exists=True, path_type=Path), default=None,
              help="truth sidecar; adds an oracle-risk row")
@click.option("--split", "split_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="split.json (needed with --oracle)")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_evaluate(artifacts, train_path, test_path, schema, oracle, split_path,
                 folds, seed, out):
    """Table-style model report plus AUC curve export and risk-group
    analysis, rows sorted by CV C-index descending."""
    out.mkdir(parents=True, exist_ok=True)
    if not artifacts and not oracle:
        raise ds.CohortError("provide at least one --artifact or --oracle")
    train, Xtr_full, names = _load_processed(train_path, schema)
    test, Xte_full, _ = _load_processed(test_path, schema)
    rows = []
    risk_groups = {}
    auc_curves = {}

    for path in artifacts:
        art = ModelArtifact.load(path)
        cols = [names.index(n) for n in art.feature_names]
        Xtr, Xte = Xtr_full[:, cols], Xte_full[:, cols]
        risks_tr = np.asarray(art.model.risk_batch(Xtr), dtype=float)
        risks_te = np.asarray(art.model.risk_batch(Xte), dtype=float)

        kind = art.kind
        factory = make_factory("CoxRidge" if kind == "CoxRidge" else kind, art.seed)
        config = art.training_summary.get("config", default_config(kind))
        fold_assign = tn.stratified_kfold(train.events, k=folds, seed=seed)
        cv_c, _ = tn.cv_score(factory, config, Xtr, train.times, train.events,
                              fold_assign)

        grid = mt.default_grid(train.times, train.events, upper=art.horizon_days)
        surv_te = art.model.survival_matrix(Xte, grid)
        rows.append(_evaluate_risks(kind, len(cols), risks_tr, risks_te, train, test,
                                    cv_c=cv_c, surv_test=surv_te, grid=grid))

        curve = mt.auc_curve(risks_te, test.times, test.events, grid)
        auc_curves[kind] = curve
        risk_groups[kind] = {
            "train": ex.risk_group_analysis(risks_tr, risks_tr, train.times,
                                            train.events),
            "test": ex.risk_group_analysis(risks_tr, risks_te, test.times,
                                           test.events),
        }

    if oracle:
        if not split_path:
            raise ds.CohortError("--oracle requires --split to map rows")
        truth = sy.OracleTruth.load(oracle)
        with open(split_path, encoding="utf-8") as fh:
            split = json.load(fh)
        risks_tr = truth.eta[np.array(split["original_rows_train"], dtype=int)]
        risks_te = truth.eta[np.array(split["original_rows_test"], dtype=int)]
        rows.append(_evaluate_risks("Oracle", 0, risks_tr, risks_te, train, test))
        risk_groups["Oracle"] = {
            "train": ex.risk_group_analysis(risks_tr, risks_tr, train.times,
                                            train.events),
            "test": ex.risk_group_analysis(risks_tr, risks_te, test.times,
                                           test.events),
        }

    rows.sort(key=lambda r: -(r["c_cv"] if r["c_cv"] is not None else -np.inf))
    _write_json(out / "report.json", rows)
    _write_json(out / "risk_groups.json", risk_groups)
    for kind, curve in auc_curves.items():
        with open(out / f"auc_curve_{kind}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv_mod.writer(fh)
            writer.writerow(["t_days", "auc", "n_cases", "n_controls"])
            for pt in curve:
                writer.writerow([pt.horizon, "" if pt.auc is None else pt.auc,
                                 pt.n_cases, pt.n_controls])
    _write_run_config(out, "evaluate", dict(
        artifacts=[str(a) for a in artifacts], train=train_path, test=test_path,
        schema=schema, oracle=oracle, split=split_path, folds=folds, seed=seed))
    for r in rows:
        click.echo(f"{r['model']:>8}  c_cv={r['c_cv'] if r['c_cv'] is not None else '-'}"
                   f"  c_train={r['c_train']:.4f}  c_test={r['c_test']:.4f}")


# ---------------------------------------------------------------------------
# predict


@main.command("predict")
@click.option("--artifact", "artifact_path",
              type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path),
              required=True, help='JSON file: {"features": {name: value, ...}}')
@guarded
def cmd_predict(artifact_path, input_path):
    """Score one patient; prints the same JSON body the HTTP service returns."""
    from fastapi import HTTPException

    from .service import _predict_payload

    art = ModelArtifact.load(artifact_path)
    with open(input_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    values = doc.get("features", doc)
    try:
        body, _ = _predict_payload(art, values)
    except HTTPException as exc:
        raise ds.CohortError(json.dumps(exc.detail))
    click.echo(json.dumps(body, ensure_ascii=False, allow_nan=False,
                          separators=(",", ":")))


# ---------------------------------------------------------------------------
# explain


@main.command("explain")
@click.option("--artifact", "artifact_path",
              type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--schema", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--row", "rows_arg", default="",
              help="comma-separated row indices; default: all rows")
@click.option("--raw-risk", is_flag=True,
              help="explain the raw risk score instead of the horizon probability")
@click.option("--budget", type=int, default=ex.DEFAULT_SAMPLING_BUDGET, show_default=True)
@click.option("--bins", type=int, default=20, show_default=True)
@click.option("--update-artifact", is_flag=True,
              help="write the extracted sign thresholds back into the artifact")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@guarded
def cmd_explain(artifact_path, data_path, schema, rows_arg, raw_risk, budget, bins,
                update_artifact, seed, out):
    """Kernel SHAP explanations plus global importance, sign thresholds,
    beeswarm CSV, and waterfall JSONs."""
    out.mkdir(parents=True, exist_ok=True)
    art = ModelArtifact.load(artifact_path)
    cohort, X, names = _load_processed(data_path, schema)
    cols = [names.index(n) for n in art.feature_names]
    Xs = X[:, cols]
    if rows_arg:
        row_ids = [int(r) for r in rows_arg.split(",")]
    else:
        row_ids = list(range(Xs.shape[0]))
    f = art.risk_fn() if raw_risk else art.probability_fn()
    display = np.array([[m.to_original(v) for m, v in zip(art.features, row)]
                        for row in Xs[row_ids]])
    exps = ex.explain_population(f, Xs[row_ids], art.background, art.feature_names,
                                 seed=seed, budget=budget, display_rows=display)

    for rid, e in zip(row_ids, exps):
        _write_json(out / f"explanation_{rid}.json",
                    e.to_dict(horizon_days=art.horizon_days))
        _write_json(out / f"waterfall_{rid}.json", ex.waterfall_data(e))

    gi = ex.global_importance(exps)
    _write_json(out / "global_importance.json", gi.to_dict())

    with open(out / "beeswarm.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(["row", "feature", "value", "phi"])
        for rid, e in zip(row_ids, exps):
            for name, val, phi in zip(e.feature_names, e.feature_values, e.phi):
                writer.writerow([rid, name, float(val), float(phi)])

    thresholds = []
    if len(exps) >= 2 * bins:
        phis = np.array([e.phi for e in exps])
        vals = np.array([e.feature_values for e in exps])
        for j, name in enumerate(art.feature_names):
            thr, note = ex.sign_change_threshold(vals[:, j], phis[:, j], name, bins)
            if thr is not None:
                thresholds.append(thr.to_dict())
            else:
                thresholds.append({"feature": name, "crossing": None, "note": note})
    _write_json(out / "thresholds.json", thresholds)
    if update_artifact:
        art.thresholds = [t for t in thresholds if t.get("crossing") is not None]
        art.save(artifact_path)

    _write_run_config(out, "explain", dict(
        artifact=artifact_path, data=data_path, schema=schema, rows=rows_arg,
        raw_risk=raw_risk, budget=budget, bins=bins,
        update_artifact=update_artifact, seed=seed))
    click.echo(f"explained {len(exps)} rows -> {out}")


if __name__ == "__main__":
    main()
