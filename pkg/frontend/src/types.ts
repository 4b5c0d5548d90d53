/** Payload shapes for the four service endpoints. */

export interface FeatureMeta {
  name: string;
  kind: string;
  unit: string | null;
  required: boolean;
  plausible_min: number | null;
  plausible_max: number | null;
}

export interface SignThreshold {
  feature: string;
  crossing: number;
  direction?: string;
}

export interface ModelMetadata {
  kind: string;
  horizon_days: number;
  features: FeatureMeta[];
  thresholds: SignThreshold[];
  training_summary: Record<string, unknown>;
}

export interface CurvePoint {
  t: number;
  value: number;
}

export interface Prediction {
  risk_score: number;
  mortality_probability: number;
  horizon_days: number;
  survival_curve: CurvePoint[];
  warnings: string[];
}

export interface WaterfallStep {
  feature: string;
  value_original_scale: number;
  phi: number;
  from: number;
  to: number;
}

export interface Waterfall {
  base: number;
  prediction: number;
  steps: WaterfallStep[];
  path_end: number;
}

export interface PhiEntry {
  feature: string;
  value_original_scale: number;
  phi: number;
}

export interface Explanation {
  base: number;
  prediction: number;
  phi: PhiEntry[];
  horizon_days?: number;
  waterfall: Waterfall;
  warnings: string[];
}

export interface WhatIfOverride {
  feature: string;
  value: number;
}

export interface WhatIfResult {
  feature: string;
  value: number;
  mortality_probability: number;
  risk_score: number;
  delta: number;
}

export interface WhatIfResponse {
  base: Prediction;
  overrides: WhatIfResult[];
}
