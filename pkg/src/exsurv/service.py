"""Stateless HTTP facade over one model artifact.

Endpoints: POST /predict, POST /explain, POST /whatif, GET /model.
Inputs arrive on the original (unnormalized) scale; absent optional
features are kNN-imputed from the donor sample stored in the artifact.
Responses depend only on the artifact and the request body, so identical
requests return identical bodies (the explanation seed is fixed per
artifact).
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import explain as ex
from .models import ModelArtifact


class PatientInput(BaseModel):
    features: dict[str, float]


class Override(BaseModel):
    feature: str
    value: float


class WhatIfRequest(BaseModel):
    base: PatientInput
    overrides: list[Override] = Field(default_factory=list)


def _validate_input(art: ModelArtifact, values: dict[str, float]):
    """400 for unknown/missing-required features, 422 for non-finite
    values; soft range violations come back as warnings."""
    known = {f.name for f in art.features}
    errors = {}
    for name in values:
        if name not in known:
            errors[name] = "unknown feature"
    for f in art.features:
        if f.required and f.name not in values:
            errors[f.name] = "required feature missing"
    if errors:
        raise HTTPException(status_code=400, detail={"fields": errors})
    hard = {}
    warnings = []
    for f in art.features:
        if f.name not in values:
            continue
        v = values[f.name]
        if not np.isfinite(v):
            hard[f.name] = "value must be finite"
        elif f.plausible_min is not None and f.plausible_max is not None:
            if not (f.plausible_min <= v <= f.plausible_max):
                warnings.append(
                    f"{f.name}={v} outside the plausible range "
                    f"[{f.plausible_min:.4g}, {f.plausible_max:.4g}]")
    if hard:
        raise HTTPException(status_code=422, detail={"fields": hard})
    return warnings


def _predict_payload(art: ModelArtifact, values: dict[str, float]):
    warnings = _validate_input(art, values)
    row = art.impute_row(art.normalize_row(values))
    risk = art.risk(row)
    if hasattr(art.model, "grid"):
        grid = np.asarray(art.model.grid, dtype=float)
    else:
        grid = np.asarray(art.model.baseline_hazard.breakpoints, dtype=float)
    grid = grid[grid <= art.horizon_days]
    surv = art.survival_at(row, grid)
    surv = np.minimum.accumulate(surv)
    prob = art.mortality_probability(row)
    return {
        "risk_score": risk,
        "mortality_probability": prob,
        "horizon_days": art.horizon_days,
        "survival_curve": [{"t": float(t), "value": float(s)}
                           for t, s in zip(grid, surv)],
        "warnings": warnings,
    }, row


def create_app(artifact: ModelArtifact | str | os.PathLike,
               cors_origins: list[str] | None = None) -> FastAPI:
    art = artifact if isinstance(artifact, ModelArtifact) else ModelArtifact.load(artifact)
    app = FastAPI(title="exsurv prediction service")
    if cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=cors_origins,
                           allow_methods=["*"], allow_headers=["*"])

    @app.get("/model")
    def model_metadata():
        if art is None:
            raise HTTPException(status_code=503, detail="no model artifact loaded")
        return {
            "kind": art.kind,
            "horizon_days": art.horizon_days,
            "features": [
                {"name": f.name, "kind": f.kind, "unit": f.unit,
                 "required": f.required, "plausible_min": f.plausible_min,
                 "plausible_max": f.plausible_max}
                for f in art.features
            ],
            "thresholds": art.thresholds,
            "training_summary": art.training_summary,
        }

    @app.post("/predict")
    def predict(payload: PatientInput):
        body, _ = _predict_payload(art, payload.features)
        return body

    @app.post("/explain")
    def explain(payload: PatientInput):
        warnings = _validate_input(art, payload.features)
        row = art.impute_row(art.normalize_row(payload.features))
        f = art.probability_fn()
        display = np.array([m.to_original(v) for m, v in zip(art.features, row)])
        explanation = ex.kernel_shap(f, row, art.background, art.feature_names,
                                     seed=art.seed, display_values=display)
        doc = explanation.to_dict(horizon_days=art.horizon_days)
        doc["waterfall"] = ex.waterfall_data(explanation)
        doc["warnings"] = warnings
        return doc

    @app.post("/whatif")
    def whatif(payload: WhatIfRequest):
        base_values = dict(payload.base.features)
        known = {f.name for f in art.features}
        bad = [o.feature for o in payload.overrides if o.feature not in known]
        if bad:
            raise HTTPException(status_code=400,
                                detail={"fields": {b: "unknown feature" for b in bad}})
        base_body, _ = _predict_payload(art, base_values)
        results = []
        for o in payload.overrides:
            values = dict(base_values)
            values[o.feature] = o.value
            body, _ = _predict_payload(art, values)
            results.append({
                "feature": o.feature,
                "value": o.value,
                "mortality_probability": body["mortality_probability"],
                "risk_score": body["risk_score"],
                "delta": body["mortality_probability"]
                         - base_body["mortality_probability"],
            })
        return {"base": base_body, "overrides": results}

    return app


def main():  # pragma: no cover - thin launcher
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="Serve a model artifact over HTTP")
    parser.add_argument("artifact", help="path to artifact.json")
    parser.add_argument("--host", default=os.environ.get("EXSURV_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("EXSURV_PORT", "8000")))
    parser.add_argument("--cors-origin", action="append", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    app = create_app(args.artifact, cors_origins=args.cors_origin)
    uvicorn.run(app, host=args.host, port=args.port, workers=args.workers)


if __name__ == "__main__":  # pragma: no cover
    main()
