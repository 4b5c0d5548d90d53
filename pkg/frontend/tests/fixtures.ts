import type {
  Explanation,
  ModelMetadata,
  Prediction,
  Waterfall,
  WhatIfResponse,
} from "../src/types.js";

export function modelFixture(nFeatures = 10): ModelMetadata {
  const features = Array.from({ length: nFeatures }, (_, i) => ({
    name: `marker_${i}`,
    kind: "continuous",
    unit: i % 2 === 0 ? `mmol/L-${i}` : null,
    required: i < 2,
    plausible_min: -2.5,
    plausible_max: 2.5,
  }));
  return {
    kind: "EST",
    horizon_days: 6142,
    features,
    thresholds: [{ feature: "marker_1", crossing: 0.75, direction: "increasing" }],
    training_summary: { n_train: 443 },
  };
}

export function predictionFixture(): Prediction {
  return {
    risk_score: 12.3,
    mortality_probability: 0.42,
    horizon_days: 6142,
    survival_curve: [
      { t: 100, value: 0.99 },
      { t: 900, value: 0.9 },
      { t: 3000, value: 0.7 },
      { t: 6000, value: 0.58 },
    ],
    warnings: [],
  };
}

export function waterfallFixture(): Waterfall {
  return {
    base: 0.35,
    prediction: 0.42,
    steps: [
      { feature: "marker_3", value_original_scale: 0.2, phi: 0.01, from: 0.35, to: 0.36 },
      { feature: "marker_1", value_original_scale: 1.4, phi: 0.1, from: 0.36, to: 0.46 },
      { feature: "marker_0", value_original_scale: -0.7, phi: -0.04, from: 0.46, to: 0.42 },
    ],
    path_end: 0.42,
  };
}

export function explanationFixture(): Explanation {
  const wf = waterfallFixture();
  return {
    base: wf.base,
    prediction: wf.prediction,
    phi: wf.steps.map((s) => ({
      feature: s.feature,
      value_original_scale: s.value_original_scale,
      phi: s.phi,
    })),
    horizon_days: 6142,
    waterfall: wf,
    warnings: [],
  };
}

export function whatIfFixture(value: number, delta: number): WhatIfResponse {
  return {
    base: predictionFixture(),
    overrides: [
      {
        feature: "marker_1",
        value,
        mortality_probability: 0.42 + delta,
        risk_score: 12.3,
        delta,
      },
    ],
  };
}
