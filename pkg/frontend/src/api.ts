/** Gateway API client. All numbers shown in the console come from here;
 * the client never computes domain results itself. */

import type {
  AddressMapDoc,
  BandwidthDoc,
  CompositionDoc,
  ErrorBody,
  FeasibilityDoc,
  PlanDoc,
  PredictionDoc,
  ScalingModelDoc,
  TopologyDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(body.message);
  }

  get code(): string {
    return this.body.code;
  }
}

async function parseResponse<T>(resp: Response): Promise<T> {
  const text = await resp.text();
  let doc: unknown = null;
  try {
    doc = text ? JSON.parse(text) : null;
  } catch {
    throw new ApiError(resp.status, {
      code: "BAD_GATEWAY_RESPONSE",
      message: `gateway returned non-JSON (status ${resp.status})`,
    });
  }
  if (!resp.ok) {
    const body = (doc as { error?: ErrorBody })?.error ?? {
      code: "HTTP_" + resp.status,
      message: `gateway error ${resp.status}`,
    };
    throw new ApiError(resp.status, body);
  }
  return doc as T;
}

export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    return parseResponse<T>(await fetch(this.baseUrl + path));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    return parseResponse<T>(
      await fetch(this.baseUrl + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  getTopology(): Promise<TopologyDoc> {
    return this.get("/v1/topology");
  }

  getState(): Promise<CompositionDoc> {
    return this.get("/v1/state");
  }

  compose(
    host: string,
    endpoints: string[],
    expectedVersion: number,
  ): Promise<CompositionDoc> {
    return this.post("/v1/compose", {
      host,
      endpoints,
      expected_version: expectedVersion,
    });
  }

  decompose(
    host: string,
    endpoints: string[],
    expectedVersion: number,
  ): Promise<CompositionDoc> {
    return this.post("/v1/decompose", {
      host,
      endpoints,
      expected_version: expectedVersion,
    });
  }

  plan(gpuCount: number, policy: string): Promise<PlanDoc> {
    return this.post("/v1/plan", { gpu_count: gpuCount, policy });
  }

  addressMap(host: string): Promise<AddressMapDoc> {
    return this.get(`/v1/addressmap?host=${encodeURIComponent(host)}`);
  }

  p2p(a: string, b: string, efficiency?: number): Promise<BandwidthDoc> {
    const eff = efficiency === undefined ? "" : `&efficiency=${efficiency}`;
    return this.get(
      `/v1/p2p?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}${eff}`,
    );
  }

  fitScaling(points: [number, number][]): Promise<ScalingModelDoc> {
    return this.post("/v1/scaling/fit", { points });
  }

  predict(n: number): Promise<PredictionDoc> {
    return this.get(`/v1/scaling/predict?n=${n}`);
  }

  poolCheck(host: string, requiredBytes: number): Promise<FeasibilityDoc> {
    return this.get(
      `/v1/pool?host=${encodeURIComponent(host)}&required=${requiredBytes}`,
    );
  }
}
