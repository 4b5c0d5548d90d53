import type { CurvePoint, Waterfall } from "./types.js";

export type BarColor = "risk" | "protective";

export interface WaterfallBar {
  feature: string;
  value: number;
  phi: number;
  from: number;
  to: number;
  /** red = risk-increasing (phi > 0), blue = protective (phi < 0) */
  color: BarColor;
}

export interface WaterfallView {
  base: number;
  prediction: number;
  bars: WaterfallBar[];
  /** true when the final cumulative marker sits left of the base */
  endsBelowBase: boolean;
  /** set when base + sum(phi) disagrees with the displayed probability */
  integrityWarning: string | null;
}

export const INTEGRITY_TOLERANCE = 1e-4;

/**
 * Turn a server waterfall payload into renderable bars. The client never
 * recomputes attributions; it only maps signs to colors and re-checks
 * the additivity of what it is about to display.
 */
export function buildWaterfallView(wf: Waterfall): WaterfallView {
  const bars: WaterfallBar[] = wf.steps.map((s) => ({
    feature: s.feature,
    value: s.value_original_scale,
    phi: s.phi,
    from: s.from,
    to: s.to,
    color: s.phi >= 0 ? "risk" : "protective",
  }));
  const total = wf.steps.reduce((acc, s) => acc + s.phi, 0);
  const mismatch = Math.abs(wf.base + total - wf.prediction);
  return {
    base: wf.base,
    prediction: wf.prediction,
    bars,
    endsBelowBase: wf.path_end < wf.base,
    integrityWarning:
      mismatch > INTEGRITY_TOLERANCE
        ? `waterfall does not add up: base + contributions differs from the probability by ${mismatch.toExponential(2)}`
        : null,
  };
}

/**
 * Survival curves are non-increasing by construction; clamp any float
 * jitter so the rendered polyline never rises.
 */
export function sanitizeCurve(points: CurvePoint[]): CurvePoint[] {
  const out: CurvePoint[] = [];
  let floor = Infinity;
  for (const p of points) {
    floor = Math.min(floor, p.value);
    out.push({ t: p.t, value: floor });
  }
  return out;
}

/** SVG polyline coordinates for a sanitized survival curve. */
export function curvePolyline(
  points: CurvePoint[],
  width: number,
  height: number,
): string {
  if (points.length === 0) return "";
  const tMax = points[points.length - 1].t || 1;
  return points
    .map((p) => `${((p.t / tMax) * width).toFixed(1)},${((1 - p.value) * height).toFixed(1)}`)
    .join(" ");
}
