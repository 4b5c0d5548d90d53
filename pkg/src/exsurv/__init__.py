"""Explainable survival analysis toolkit: censored-cohort preprocessing,
filter-ensemble feature selection, ridge Cox and survival-forest models,
TPE hyperparameter search, IPCW evaluation metrics, and Kernel SHAP
explanations, with synthetic Weibull-Cox cohorts as test oracles."""

__version__ = "0.1.0"
