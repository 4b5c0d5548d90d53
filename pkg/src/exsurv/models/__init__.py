"""Survival models sharing one prediction contract: a scalar risk score
plus a survival step function."""

from .artifact import ARTIFACT_VERSION, FeatureMeta, ModelArtifact
from .cox import (CoxConvergenceError, CoxRidgeModel, breslow_baseline,
                  cox_wald_pvalue, fit_cox_ridge, penalized_gradient,
                  penalized_hessian, penalized_loglik)
from .forest import ForestHyperparams, ForestModel, SurvivalTree, fit_forest

__all__ = [
    "ARTIFACT_VERSION", "FeatureMeta", "ModelArtifact",
    "CoxConvergenceError", "CoxRidgeModel", "breslow_baseline", "cox_wald_pvalue",
    "fit_cox_ridge", "penalized_gradient", "penalized_hessian", "penalized_loglik",
    "ForestHyperparams", "ForestModel", "SurvivalTree", "fit_forest",
]
