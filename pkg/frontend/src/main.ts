import { ServiceClient, ServiceError } from "./api.js";
import { buildFormModel, validateValues } from "./form.js";
import type { FormModel } from "./form.js";
import {
  renderBanner,
  renderForm,
  renderPrediction,
  renderWaterfall,
  renderWhatIf,
} from "./render.js";
import type { WhatIfOverride } from "./types.js";
import { buildWaterfallView } from "./waterfall.js";
import { WhatIfController } from "./whatif.js";

const client = new ServiceClient(
  new URLSearchParams(window.location.search).get("service") ?? "",
);

const nodes = {
  banner: document.getElementById("banner")!,
  form: document.getElementById("form")!,
  issues: document.getElementById("issues")!,
  prediction: document.getElementById("prediction")!,
  waterfall: document.getElementById("waterfall")!,
  whatif: document.getElementById("whatif")!,
  submit: document.getElementById("submit") as HTMLButtonElement,
};

// patient inputs live only in memory; nothing is persisted client-side
const values: Record<string, number> = {};
let form: FormModel | null = null;

const whatIf = new WhatIfController({
  send: (overrides: WhatIfOverride[]) => client.whatIf({ ...values }, overrides),
  onResult: (response) => renderWhatIf(nodes.whatif, response),
  onError: (err) => showIssues([String(err)]),
});

function showIssues(messages: string[]): void {
  nodes.issues.replaceChildren();
  for (const m of messages) {
    const div = document.createElement("div");
    div.className = "warning";
    div.textContent = m;
    nodes.issues.appendChild(div);
  }
}

async function submit(): Promise<void> {
  if (!form) return;
  const issues = validateValues(form, values);
  showIssues(issues.map((i) => `${i.field}: ${i.message}`));
  if (issues.some((i) => i.blocking)) return;
  try {
    const [pred, explanation] = await Promise.all([
      client.predict({ ...values }),
      client.explain({ ...values }),
    ]);
    renderPrediction(nodes.prediction, pred);
    renderWaterfall(nodes.waterfall, buildWaterfallView(explanation.waterfall));
  } catch (err) {
    if (err instanceof ServiceError) {
      showIssues([`service rejected the input: ${JSON.stringify(err.detail)}`]);
    } else {
      renderBanner(nodes.banner, "service unreachable", boot);
    }
  }
}

async function boot(): Promise<void> {
  nodes.banner.replaceChildren();
  try {
    const meta = await client.getModel();
    form = buildFormModel(meta);
    renderForm(nodes.form, form, (name, value) => {
      if (Number.isNaN(value)) {
        delete values[name];
      } else {
        values[name] = value;
        whatIf.update([{ feature: name, value }]);
      }
    });
  } catch {
    renderBanner(nodes.banner, "service unreachable", boot);
  }
}

nodes.submit.addEventListener("click", () => void submit());
void boot();
