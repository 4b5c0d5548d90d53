import type { WhatIfOverride, WhatIfResponse } from "./types.js";

export const WHATIF_DEBOUNCE_MS = 250;

export interface WhatIfControllerOptions {
  send: (overrides: WhatIfOverride[]) => Promise<WhatIfResponse>;
  onResult: (response: WhatIfResponse) => void;
  onError?: (err: unknown) => void;
  debounceMs?: number;
}

/**
 * Debounced, latest-wins what-if dispatcher.
 *
 * Rapid slider movement collapses into one request per quiet period of
 * ``debounceMs``. Every request carries a monotonically increasing id;
 * a response is delivered only while its id is still the newest, so a
 * slow early response can never overwrite a newer one.
 */
export class WhatIfController {
  private send: WhatIfControllerOptions["send"];
  private onResult: WhatIfControllerOptions["onResult"];
  private onError: (err: unknown) => void;
  private debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private requestId = 0;

  constructor(options: WhatIfControllerOptions) {
    this.send = options.send;
    this.onResult = options.onResult;
    this.onError = options.onError ?? (() => undefined);
    this.debounceMs = options.debounceMs ?? WHATIF_DEBOUNCE_MS;
  }

  /** Call on every slider/input change. */
  update(overrides: WhatIfOverride[]): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.dispatch(overrides);
    }, this.debounceMs);
  }

  private dispatch(overrides: WhatIfOverride[]): void {
    const id = ++this.requestId;
    this.send(overrides).then(
      (response) => {
        if (id === this.requestId) this.onResult(response);
      },
      (err) => {
        if (id === this.requestId) this.onError(err);
      },
    );
  }
}
