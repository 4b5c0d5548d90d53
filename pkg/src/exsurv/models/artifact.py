"""Versioned JSON model artifact.

One file carries everything the prediction service needs: the fitted
model, feature metadata with training normalization stats and plausible
ranges, a capped imputation donor sample, the SHAP background sample,
and (once computed) sign-change thresholds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..dataset import NormalizationStats
from ..survcore import StepFunction
from .cox import CoxRidgeModel
from .forest import ForestModel

ARTIFACT_VERSION = 1


@dataclass
class FeatureMeta:
    name: str
    kind: str = "continuous"
    unit: str | None = None
    required: bool = False
    levels: list[str] = field(default_factory=list)
    mean: float = 0.0
    std: float = 1.0
    normalized: bool = False
    plausible_min: float | None = None
    plausible_max: float | None = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_normalized(self, value: float) -> float:
        return (value - self.mean) / self.std if self.normalized else value

    def to_original(self, value: float) -> float:
        return value * self.std + self.mean if self.normalized else value


@dataclass
class ModelArtifact:
    model: CoxRidgeModel | ForestModel
    features: list[FeatureMeta]
    horizon_days: float
    seed: int
    background: np.ndarray             # normalized rows for SHAP
    donors: np.ndarray                 # normalized rows for kNN imputation of absent inputs
    thresholds: list[dict] = field(default_factory=list)
    training_summary: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "CoxRidge" if isinstance(self.model, CoxRidgeModel) else self.model.kind

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def normalize_row(self, values: dict[str, float]) -> np.ndarray:
        row = np.empty(len(self.features))
        for j, f in enumerate(self.features):
            row[j] = f.to_normalized(values[f.name]) if f.name in values else np.nan
        return row

    def impute_row(self, row: np.ndarray, k: int = 5) -> np.ndarray:
        """kNN-fill absent (NaN) coordinates from the stored donor sample."""
        miss = np.isnan(row)
        if not np.any(miss):
            return row
        obs = ~miss
        p = row.size
        if not np.any(obs):
            return np.nanmean(self.donors, axis=0)
        diff = self.donors[:, obs] - row[obs]
        dist = np.sqrt((diff**2).sum(axis=1) * p / max(int(obs.sum()), 1))
        order = np.argsort(dist, kind="stable")
        out = row.copy()
        out[miss] = self.donors[order[:k]][:, miss].mean(axis=0)
        return out

    def save(self, path):
        if isinstance(self.model, CoxRidgeModel):
            model_dict = {
                "beta": self.model.beta.tolist(),
                "lambda": self.model.lam,
                "baseline_breakpoints": self.model.baseline_hazard.breakpoints.tolist(),
                "baseline_values": self.model.baseline_hazard.values.tolist(),
                "feature_names": self.model.feature_names,
            }
        else:
            model_dict = self.model.to_dict()
        doc = {
            "version": ARTIFACT_VERSION,
            "kind": self.kind,
            "horizon_days": self.horizon_days,
            "seed": self.seed,
            "features": [f.to_dict() for f in self.features],
            "model": model_dict,
            "background": self.background.tolist(),
            "donors": self.donors.tolist(),
            "thresholds": self.thresholds,
            "training_summary": self.training_summary,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != ARTIFACT_VERSION:
            raise ValueError(f"unsupported artifact version {doc.get('version')!r}")
        if doc["kind"] == "CoxRidge":
            md = doc["model"]
            model = CoxRidgeModel(
                beta=np.array(md["beta"], dtype=float),
                lam=float(md["lambda"]),
                baseline_hazard=StepFunction(np.array(md["baseline_breakpoints"]),
                                             np.array(md["baseline_values"])),
                feature_names=list(md["feature_names"]),
            )
        else:
            model = ForestModel.from_dict(doc["model"])
        return cls(
            model=model,
            features=[FeatureMeta.from_dict(d) for d in doc["features"]],
            horizon_days=float(doc["horizon_days"]),
            seed=int(doc["seed"]),
            background=np.array(doc["background"], dtype=float).reshape(
                -1, len(doc["features"])),
            donors=np.array(doc["donors"], dtype=float).reshape(-1, len(doc["features"])),
            thresholds=list(doc.get("thresholds", [])),
            training_summary=dict(doc.get("training_summary", {})),
        )

    # unified prediction surface -------------------------------------------

    def risk(self, row: np.ndarray) -> float:
        return float(self.model.risk_batch(np.atleast_2d(row))[0])

    def survival_at(self, row: np.ndarray, grid) -> np.ndarray:
        return self.model.survival_matrix(np.atleast_2d(row), grid)[0]

    def mortality_probability(self, row: np.ndarray) -> float:
        return float(1.0 - self.survival_at(row, [self.horizon_days])[0])

    def probability_fn(self):
        """Batch callable X -> P(death by horizon), the SHAP target."""
        def f(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            if hasattr(self.model, "chf_at"):
                return 1.0 - np.exp(-self.model.chf_at(X, self.horizon_days))
            return 1.0 - self.model.survival_matrix(X, [self.horizon_days])[:, 0]
        return f

    def risk_fn(self):
        def f(X):
            return np.asarray(self.model.risk_batch(np.atleast_2d(X)), dtype=float)
        return f
