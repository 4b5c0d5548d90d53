import type {
  Explanation,
  ModelMetadata,
  Prediction,
  WhatIfOverride,
  WhatIfResponse,
} from "./types.js";

export class ServiceError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(`service responded ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail: unknown = null;
    try {
      detail = await res.json();
    } catch {
      detail = await res.text();
    }
    throw new ServiceError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

/** Thin typed client; every number shown in the UI comes through here. */
export class ServiceClient {
  baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  getModel(): Promise<ModelMetadata> {
    return fetch(`${this.baseUrl}/model`).then((r) => asJson<ModelMetadata>(r));
  }

  predict(features: Record<string, number>): Promise<Prediction> {
    return fetch(`${this.baseUrl}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ features }),
    }).then((r) => asJson<Prediction>(r));
  }

  explain(features: Record<string, number>): Promise<Explanation> {
    return fetch(`${this.baseUrl}/explain`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ features }),
    }).then((r) => asJson<Explanation>(r));
  }

  whatIf(
    features: Record<string, number>,
    overrides: WhatIfOverride[],
  ): Promise<WhatIfResponse> {
    return fetch(`${this.baseUrl}/whatif`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ base: { features }, overrides }),
    }).then((r) => asJson<WhatIfResponse>(r));
  }
}
