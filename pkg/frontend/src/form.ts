import type { ModelMetadata } from "./types.js";

export interface FormField {
  name: string;
  label: string;
  unit: string | null;
  required: boolean;
  min: number | null;
  max: number | null;
  /** sign-change threshold hint from the artifact, when available */
  thresholdHint: string | null;
}

export interface FormModel {
  modelKind: string;
  horizonYears: number;
  fields: FormField[];
}

/**
 * Derive the patient form entirely from /model metadata. No feature
 * names, units, or ranges are hardcoded in the client.
 */
export function buildFormModel(meta: ModelMetadata): FormModel {
  const hints = new Map<string, string>();
  for (const t of meta.thresholds ?? []) {
    if (t.crossing !== null && t.crossing !== undefined) {
      const dir = t.direction ? ` (${t.direction})` : "";
      hints.set(t.feature, `sign change near ${formatNumber(t.crossing)}${dir}`);
    }
  }
  return {
    modelKind: meta.kind,
    horizonYears: meta.horizon_days / 365.25,
    fields: meta.features.map((f) => ({
      name: f.name,
      label: f.unit ? `${f.name} [${f.unit}]` : f.name,
      unit: f.unit,
      required: f.required,
      min: f.plausible_min,
      max: f.plausible_max,
      thresholdHint: hints.get(f.name) ?? null,
    })),
  };
}

export interface FieldIssue {
  field: string;
  message: string;
  blocking: boolean;
}

/**
 * Client-side validation mirroring the server's soft plausible ranges:
 * non-numeric input blocks submission, out-of-range values only warn.
 */
export function validateValues(
  form: FormModel,
  values: Record<string, number>,
): FieldIssue[] {
  const issues: FieldIssue[] = [];
  for (const field of form.fields) {
    const v = values[field.name];
    if (v === undefined || Number.isNaN(v)) {
      if (field.required) {
        issues.push({
          field: field.name,
          message: "required value missing",
          blocking: true,
        });
      }
      continue;
    }
    if (!Number.isFinite(v)) {
      issues.push({ field: field.name, message: "value must be finite", blocking: true });
      continue;
    }
    if (field.min !== null && field.max !== null && (v < field.min || v > field.max)) {
      issues.push({
        field: field.name,
        message: `outside the plausible range [${formatNumber(field.min)}, ${formatNumber(field.max)}]`,
        blocking: false,
      });
    }
  }
  return issues;
}

export function formatNumber(v: number): string {
  return Number(v.toPrecision(4)).toString();
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function formatSignedPercent(p: number): string {
  const text = `${(Math.abs(p) * 100).toFixed(1)}%`;
  if (p > 0) return `+${text}`;
  if (p < 0) return `-${text}`;
  return "0.0%";
}
