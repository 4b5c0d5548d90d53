"""Kernel SHAP walk-through for one synthetic patient.

Fits an EST ensemble, explains the predicted event probability at the
study horizon for the highest-risk test patient, and prints the
waterfall from the population base rate to the individual prediction.

Run:  python3 demos/03_explain_a_patient.py
"""

import numpy as np

from exsurv.explain import kernel_shap, waterfall_data
from exsurv.models import ForestHyperparams, fit_forest
from exsurv.synth import generate_cohort, nonlinear_spec, DEFAULT_HORIZON_DAYS

cohort, _ = generate_cohort(nonlinear_spec(n=800, seed=3))
X, times, events = cohort.X, cohort.times, cohort.events
names = [f.name for f in cohort.features]

model = fit_forest(X, times, events, ForestHyperparams(n_trees=150), kind="EST",
                   seed=0)

grid = model.grid
k = int(np.searchsorted(grid, DEFAULT_HORIZON_DAYS, side="right")) - 1


def mortality_at_horizon(rows):
    return 1.0 - model.survival_matrix(rows)[:, k]


background = X[~events]  # patients who never had the event
risks = model.risk_batch(X)
patient = X[int(np.argmax(risks))]

e = kernel_shap(mortality_at_horizon, patient, background, feature_names=names)
print(f"base rate (background mean): {e.base_value:.3f}")
print(f"this patient:                {e.prediction:.3f}")
print(f"local accuracy residual:     {e.residual():.2e}\n")

wf = waterfall_data(e)
print(f"{'feature':>8} {'value':>8} {'phi':>8}   cumulative")
for step in wf["steps"]:
    print(f"{step['feature']:>8} {step['value_original_scale']:8.2f} "
          f"{step['phi']:+8.3f}   {step['from']:.3f} -> {step['to']:.3f}")
print(f"\npath ends at {wf['path_end']:.3f} == prediction {e.prediction:.3f}")
