import type { FormModel } from "./form.js";
import { formatNumber, formatPercent, formatSignedPercent } from "./form.js";
import type { Prediction, WhatIfResponse } from "./types.js";
import type { WaterfallView } from "./waterfall.js";
import { curvePolyline, sanitizeCurve } from "./waterfall.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderForm(
  container: HTMLElement,
  form: FormModel,
  onChange: (name: string, value: number) => void,
): void {
  container.replaceChildren();
  const heading = el("h2", undefined,
    `${form.modelKind} model, ${form.horizonYears.toFixed(1)}-year horizon`);
  container.appendChild(heading);
  for (const field of form.fields) {
    const row = el("div", "field-row");
    const label = el("label", "field-label", field.label);
    label.htmlFor = `field-${field.name}`;
    if (field.required) label.textContent += " *";
    const input = el("input", "field-input");
    input.type = "number";
    input.step = "any";
    input.id = `field-${field.name}`;
    if (field.min !== null && field.max !== null) {
      input.placeholder = `${formatNumber(field.min)} .. ${formatNumber(field.max)}`;
    }
    input.addEventListener("input", () => {
      onChange(field.name, input.valueAsNumber);
    });
    row.appendChild(label);
    row.appendChild(input);
    if (field.thresholdHint) {
      row.appendChild(el("span", "hint", field.thresholdHint));
    }
    container.appendChild(row);
  }
}

export function renderPrediction(container: HTMLElement, pred: Prediction): void {
  container.replaceChildren();
  container.appendChild(
    el("div", "prob-big", formatPercent(pred.mortality_probability)),
  );
  container.appendChild(
    el("div", "prob-caption",
       `mortality probability by ${(pred.horizon_days / 365.25).toFixed(1)} years`),
  );
  for (const w of pred.warnings) {
    container.appendChild(el("div", "warning", w));
  }

  const width = 420;
  const height = 140;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "curve");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", curvePolyline(sanitizeCurve(pred.survival_curve), width, height));
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  svg.appendChild(line);
  container.appendChild(svg);
}

export function renderWaterfall(container: HTMLElement, view: WaterfallView): void {
  container.replaceChildren();
  if (view.integrityWarning) {
    container.appendChild(el("div", "warning", view.integrityWarning));
  }
  container.appendChild(
    el("div", "wf-base", `base ${formatPercent(view.base)}`),
  );
  const maxAbs = Math.max(...view.bars.map((b) => Math.abs(b.phi)), 1e-12);
  for (const bar of [...view.bars].reverse()) {
    const row = el("div", "wf-row");
    row.appendChild(el("span", "wf-feature",
      `${bar.feature} = ${formatNumber(bar.value)}`));
    const track = el("div", "wf-track");
    const fill = el("div", `wf-bar ${bar.color}`);
    fill.style.width = `${(Math.abs(bar.phi) / maxAbs) * 100}%`;
    fill.title = formatSignedPercent(bar.phi);
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el("span", "wf-phi", formatSignedPercent(bar.phi)));
    container.appendChild(row);
  }
  container.appendChild(
    el("div", "wf-end", `prediction ${formatPercent(view.prediction)}`),
  );
}

export function renderWhatIf(container: HTMLElement, response: WhatIfResponse): void {
  container.replaceChildren();
  container.appendChild(el("div", "wf-base",
    `base ${formatPercent(response.base.mortality_probability)}`));
  for (const o of response.overrides) {
    const sign = o.delta > 0 ? "risk" : o.delta < 0 ? "protective" : "neutral";
    const row = el("div", `whatif-row ${sign}`);
    row.appendChild(el("span", "wf-feature", `${o.feature} -> ${formatNumber(o.value)}`));
    row.appendChild(el("span", "wf-phi",
      `${formatPercent(o.mortality_probability)} (${formatSignedPercent(o.delta)})`));
    container.appendChild(row);
  }
}

export function renderBanner(container: HTMLElement, message: string,
                             onRetry: () => void): void {
  container.replaceChildren();
  const banner = el("div", "banner", message);
  const retry = el("button", "retry", "retry");
  retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
  container.appendChild(banner);
}
