import { afterEach, describe, expect, test, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api.js";
import { modelFixture, predictionFixture } from "./fixtures.js";

function mockFetch(status: number, body: unknown) {
  const fn = vi.fn().mockResolvedValue(
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    }),
  );
  vi.stubGlobal("fetch", fn);
  return fn;
}

afterEach(() => vi.unstubAllGlobals());

describe("service client", () => {
  test("getModel hits /model and returns the metadata as-is", async () => {
    const fn = mockFetch(200, modelFixture());
    const meta = await new ServiceClient("http://svc:8000/").getModel();
    expect(fn).toHaveBeenCalledWith("http://svc:8000/model");
    expect(meta.features).toHaveLength(10);
  });

  test("predict posts the feature map in the request envelope", async () => {
    const fn = mockFetch(200, predictionFixture());
    await new ServiceClient().predict({ marker_0: 1.5 });
    const [url, init] = fn.mock.calls[0];
    expect(url).toBe("/predict");
    expect(JSON.parse(init.body)).toEqual({ features: { marker_0: 1.5 } });
  });

  test("whatif posts base features plus overrides", async () => {
    const fn = mockFetch(200, { base: predictionFixture(), overrides: [] });
    await new ServiceClient().whatIf(
      { marker_0: 1.0 },
      [{ feature: "marker_1", value: 2.0 }],
    );
    const body = JSON.parse(fn.mock.calls[0][1].body);
    expect(body.base.features).toEqual({ marker_0: 1.0 });
    expect(body.overrides).toEqual([{ feature: "marker_1", value: 2.0 }]);
  });

  test("non-2xx responses raise ServiceError with the server detail", async () => {
    mockFetch(422, { detail: { fields: { marker_0: "value must be finite" } } });
    await expect(new ServiceClient().predict({ marker_0: NaN })).rejects.toThrowError(
      ServiceError,
    );
  });
});
